#include "drfuse/codec.hpp"
#include "drfuse/errors.hpp"
#include "drfuse/fusion.hpp"
#include "drfuse/linalg.hpp"
#include "drfuse/metrics.hpp"
#include "drfuse/reduction.hpp"
#include "drfuse/scenarios.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace drfuse;

namespace {

py::dict fused_dict(const FusedEstimate& f) {
    py::dict d;
    d["mean"] = f.mean;
    d["cov"] = f.cov;
    if (f.gain) d["gain"] = *f.gain;
    d["used_pseudoinverse"] = f.used_pseudoinverse;
    d["joint_not_psd"] = f.joint_not_psd;
    d["remote_uninformative"] = f.remote_uninformative;
    return d;
}

ReducedEstimate reduced(const Vector& mean, const Matrix& cov, const Matrix& map) { return {mean, cov, map}; }

Matrix observation(const std::optional<Matrix>& h, Eigen::Index n2, Eigen::Index nx) {
    return h ? *h : Matrix::Identity(n2, nx);
}

}  // namespace

PYBIND11_MODULE(_drfuse, m) {
    m.doc() = "Fusion of dimension-reduced estimates";

    auto base = py::register_exception<Error>(m, "DrfuseError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<DefinitenessError>(m, "DefinitenessError", base.ptr());
    py::register_exception<RankError>(m, "RankError", base.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<FramingError>(m, "FramingError", base.ptr());
    py::register_exception<CorruptMessageError>(m, "CorruptMessageError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    m.def("eig_sym", [](const Matrix& a) {
        const EigenPairs p = eig_sym(a);
        return py::make_tuple(p.values, p.vectors);
    });
    m.def("solve_gevp", [](const Matrix& q, const Matrix& s) {
        const EigenPairs p = solve_gevp(q, s);
        return py::make_tuple(p.values, p.vectors);
    });
    m.def("orthonormalize_rows", &orthonormalize_rows);

    m.def("gevo", [](const Matrix& r1, const Matrix& r2, const Matrix& r12, int m_, const std::optional<Matrix>& h) {
        return gevo({r1, r2, r12, observation(h, r2.rows(), r1.rows()), m_});
    }, py::arg("r1"), py::arg("r2"), py::arg("r12"), py::arg("m"), py::arg("h") = py::none());
    m.def("gevo_kf", [](const Matrix& r1, const Matrix& r2, int m_, const std::optional<Matrix>& h) {
        return gevo_kf(r1, r2, observation(h, r2.rows(), r1.rows()), m_);
    }, py::arg("r1"), py::arg("r2"), py::arg("m"), py::arg("h") = py::none());
    m.def("gevo_ci", [](const Matrix& r1, const Matrix& r2, int m_, const std::optional<Matrix>& h, double epsilon,
                        double omega0, int max_iters) {
        const GevoCiResult r = gevo_ci(r1, r2, observation(h, r2.rows(), r1.rows()), m_, {omega0, epsilon, max_iters});
        py::dict d;
        d["map"] = r.map;
        d["omega"] = r.omega.value();
        d["j_values"] = r.trace.j_values;
        d["omegas"] = r.trace.omegas;
        d["iterations"] = r.trace.iterations;
        d["truncated"] = r.trace.truncated;
        return d;
    }, py::arg("r1"), py::arg("r2"), py::arg("m"), py::arg("h") = py::none(), py::arg("epsilon") = 1e-4,
       py::arg("omega0") = 0.5, py::arg("max_iters") = 100);
    m.def("gevo_le", [](const Matrix& r1, const Matrix& r2, int m_, const std::optional<Matrix>& h) {
        return gevo_le(r1, r2, observation(h, r2.rows(), r1.rows()), m_);
    }, py::arg("r1"), py::arg("r2"), py::arg("m"), py::arg("h") = py::none());
    m.def("pco", &pco, py::arg("r2"), py::arg("m"));
    m.def("dca_eig", [](const Matrix& r2) {
        const DiagonalApproximation d = dca_eig(r2);
        return py::make_tuple(d.scale, d.cov);
    });
    m.def("loss_ladder", [](const Matrix& r1, const Matrix& r2, const Matrix& r12, const std::optional<Matrix>& h) {
        const LossLadder l = loss_ladder({r1, r2, r12, observation(h, r2.rows(), r1.rows()), 1});
        return py::make_tuple(l.ell, l.lambdas);
    }, py::arg("r1"), py::arg("r2"), py::arg("r12"), py::arg("h") = py::none());
    m.def("select_m", [](const Vector& lambdas, double tau) {
        const RankSelection s = select_m({Vector(), lambdas}, tau);
        return py::make_tuple(s.m, s.degenerate);
    });

    m.def("fuse_bsc", [](const Vector& y1, const Matrix& r1, const Vector& ym, const Matrix& rm, const Matrix& map,
                         const Matrix& r12, const std::optional<Matrix>& h) {
        return fused_dict(fuse_bsc({y1, r1}, reduced(ym, rm, map), observation(h, map.cols(), r1.rows()), r12));
    }, py::arg("y1"), py::arg("r1"), py::arg("ym"), py::arg("rm"), py::arg("map"), py::arg("r12"),
       py::arg("h") = py::none());
    m.def("fuse_kf", [](const Vector& y1, const Matrix& r1, const Vector& ym, const Matrix& rm, const Matrix& map,
                        const std::optional<Matrix>& h) {
        return fused_dict(fuse_kf({y1, r1}, reduced(ym, rm, map), observation(h, map.cols(), r1.rows())));
    }, py::arg("y1"), py::arg("r1"), py::arg("ym"), py::arg("rm"), py::arg("map"), py::arg("h") = py::none());
    m.def("optimize_ci_omega", [](const Matrix& r1, const Matrix& rm, const Matrix& map, const std::optional<Matrix>& h) {
        return optimize_ci_omega(r1, reduced(Vector::Zero(map.rows()), rm, map), observation(h, map.cols(), r1.rows())).value();
    }, py::arg("r1"), py::arg("rm"), py::arg("map"), py::arg("h") = py::none());
    m.def("fuse_ci", [](const Vector& y1, const Matrix& r1, const Vector& ym, const Matrix& rm, const Matrix& map,
                        std::optional<double> omega, const std::optional<Matrix>& h) {
        const Matrix hh = observation(h, map.cols(), r1.rows());
        const ReducedEstimate remote = reduced(ym, rm, map);
        const CiWeight w = omega ? CiWeight(*omega) : optimize_ci_omega(r1, remote, hh);
        py::dict d = fused_dict(fuse_ci({y1, r1}, remote, hh, w));
        d["omega"] = w.value();
        return d;
    }, py::arg("y1"), py::arg("r1"), py::arg("ym"), py::arg("rm"), py::arg("map"), py::arg("omega") = py::none(),
       py::arg("h") = py::none());
    m.def("fuse_le", [](const Vector& y1, const Matrix& r1, const Vector& ym, const Matrix& rm, const Matrix& map,
                        const std::optional<Matrix>& h) {
        return fused_dict(fuse_le({y1, r1}, reduced(ym, rm, map), observation(h, map.cols(), r1.rows())));
    }, py::arg("y1"), py::arg("r1"), py::arg("ym"), py::arg("rm"), py::arg("map"), py::arg("h") = py::none());

    m.def("encode", [](const Vector& ym, const Matrix& rm, const Matrix& map) {
        const std::vector<std::uint8_t> bytes = serialize(encode(reduced(ym, rm, map)));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }, py::arg("ym"), py::arg("rm"), py::arg("map"));
    m.def("decode", [](const py::bytes& data) {
        const std::string raw = data;
        const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
        const ReducedEstimate e = decode(deserialize(bytes));
        return py::make_tuple(e.mean, e.cov, e.map);
    });
    m.def("cost_report", [](long n2, long m_) {
        const CostReport r = cost_report(n2, m_);
        py::dict d;
        d["n_dr"] = r.n_dr;
        d["n_full"] = r.n_full;
        d["n_dca"] = r.n_dca;
        d["n_excl"] = r.n_excl;
        d["ratio"] = r.ratio;
        d["extra_bits_ratio"] = r.extra_bits_ratio;
        return d;
    }, py::arg("n2"), py::arg("m"));

    m.def("coin", &coin);
    m.def("anees", &anees);
    m.def("rmtr", &rmtr);
    m.def("mc_error_cov", &mc_error_cov);

    m.def("run_convergence_study", [](int nx, double epsilon, std::vector<int> ms, int trials, std::uint64_t seed,
                                      bool resample) {
        ConvergenceStudyConfig cfg;
        cfg.nx = nx;
        cfg.epsilon = epsilon;
        cfg.ms = std::move(ms);
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.resample = resample;
        py::list out;
        for (const ConvergenceSummary& s : run_convergence_study(cfg)) {
            py::dict d;
            d["m"] = s.m;
            d["typical"] = s.typical;
            d["mean"] = s.mean;
            d["std"] = s.std;
            d["histogram"] = s.histogram;
            d["truncated"] = s.truncated;
            out.append(d);
        }
        return out;
    }, py::arg("nx") = 9, py::arg("epsilon") = 1e-4, py::arg("ms") = std::vector<int>{1, 2, 3, 4},
       py::arg("trials") = 1000, py::arg("seed") = 1, py::arg("resample") = true);
    m.def("run_rho_example", [](std::vector<double> rhos, std::vector<int> ms) {
        RhoConfig cfg = RhoConfig::defaults();
        if (!rhos.empty()) cfg.rhos = std::move(rhos);
        cfg.ms = std::move(ms);
        py::list out;
        for (const RhoRow& r : run_rho_example(cfg)) {
            py::dict d;
            d["rho"] = r.rho;
            d["method"] = r.method;
            d["m"] = r.m;
            d["coin"] = r.coin;
            d["anees"] = r.anees;
            d["rmtr"] = r.rmtr;
            d["ok"] = r.ok;
            out.append(d);
        }
        return out;
    }, py::arg("rhos") = std::vector<double>{}, py::arg("ms") = std::vector<int>{1, 2, 3});
    m.def("run_dtt", [](int runs, int steps, std::uint64_t seed, int m_) {
        DttConfig cfg = DttConfig::defaults();
        cfg.runs = runs;
        cfg.steps = steps;
        cfg.seed = seed;
        cfg.m = m_;
        py::list out;
        for (const DttRow& r : run_dtt(cfg)) {
            py::dict d;
            d["agent"] = r.agent;
            d["step"] = r.step;
            d["method"] = r.method;
            d["m"] = r.m;
            d["coin"] = r.coin;
            d["anees"] = r.anees;
            d["rmtr"] = r.rmtr;
            out.append(d);
        }
        return out;
    }, py::arg("runs") = 500, py::arg("steps") = 15, py::arg("seed") = 1, py::arg("m") = 2);
}
