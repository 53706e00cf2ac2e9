#include "drfuse/csv_io.hpp"

#include "drfuse/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace drfuse {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& raw, std::size_t line) {
    const std::string cell = trim(raw);
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("line " + std::to_string(line) + ": not a finite number: '" + cell + "'");
    return value;
}

}  // namespace

std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

Matrix parse_matrix_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(parse_cell(cell, lineno));
        if (!line.empty() && trim(line).back() == ',') throw ParseError("line " + std::to_string(lineno) + ": trailing comma");
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("line " + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("matrix file is empty");
    Matrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return a;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Matrix read_matrix_csv(const std::string& path) {
    try {
        return parse_matrix_csv(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_matrix_csv(std::ostream& os, const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << format_double(a(i, j));
        os << '\n';
    }
}

Vector read_vector_csv(const std::string& path) {
    const Matrix a = read_matrix_csv(path);
    if (a.cols() == 1) return a.col(0);
    if (a.rows() == 1) return a.row(0).transpose();
    throw ParseError(path + ": expected a single row or column");
}

ReducedEstimate parse_reduced_csv(const std::string& text) {
    const Matrix a = parse_matrix_csv(text);
    if (a.cols() < 3) throw ParseError("reduced estimate needs at least three columns");
    ReducedEstimate e;
    e.mean = a.col(0);
    e.cov = a.col(1).asDiagonal();
    e.map = a.rightCols(a.cols() - 2);
    return e;
}

ReducedEstimate read_reduced_csv(const std::string& path) {
    try {
        return parse_reduced_csv(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_reduced_csv(std::ostream& os, const ReducedEstimate& e) {
    if (max_off_diagonal(e.cov) > 1e-9 * e.cov.diagonal().cwiseAbs().maxCoeff()) throw PreconditionError("reduced covariance must be diagonal to be written");
    Matrix a(e.map.rows(), e.map.cols() + 2);
    a.col(0) = e.mean;
    a.col(1) = e.cov.diagonal();
    a.rightCols(e.map.cols()) = e.map;
    write_matrix_csv(os, a);
}

void write_results_csv(std::ostream& os, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
        os << '\n';
    }
}

}  // namespace drfuse
