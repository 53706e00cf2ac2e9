#pragma once

#include "drfuse/fusion.hpp"
#include "drfuse/linalg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace drfuse {

/// 17 significant digits in general notation; -0 prints as 0.
std::string format_double(double v);

Matrix parse_matrix_csv(const std::string& text);
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(std::ostream& os, const Matrix& a);

/// Accepts a single row or a single column.
Vector read_vector_csv(const std::string& path);

/// One row per component: y_i, r_i, M_i1 … M_in.
ReducedEstimate parse_reduced_csv(const std::string& text);
ReducedEstimate read_reduced_csv(const std::string& path);
void write_reduced_csv(std::ostream& os, const ReducedEstimate& e);

/// Comma-joined rows with a header line.
void write_results_csv(std::ostream& os, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);

}  // namespace drfuse
