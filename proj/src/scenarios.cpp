#include "drfuse/scenarios.hpp"

#include "drfuse/errors.hpp"
#include "drfuse/fusion.hpp"
#include "drfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

namespace drfuse {
namespace {

constexpr std::size_t kChunkSize = 250;

// Runs fn(chunk, begin, end) over fixed-size chunks of [0, n). Chunk boundaries do not
// depend on the worker count, so per-chunk results can be reduced in a fixed order.
void for_each_chunk(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
    const auto body = [&](std::size_t c) { fn(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize)); };
    const std::size_t workers = std::min<std::size_t>(chunks, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) body(c);
        });
    for (auto& t : pool) t.join();
}

Matrix psd_factor(const Matrix& a) {
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a));
    return solver.eigenvectors() * solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector standard_normal(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

// True error covariance of x̂ = K₁y₁ + K_M M y₂ with H₂ = I.
Matrix rule_error_cov(const LinearRule& rule, const Matrix& map, const Matrix& r1, const Matrix& r2, const Matrix& r12) {
    const Matrix g = rule.remote_gain * map;
    const Matrix cross = rule.local_gain * r12 * g.transpose();
    return symmetrize(rule.local_gain * r1 * rule.local_gain.transpose() + cross + cross.transpose() +
                      g * r2 * g.transpose());
}

bool dominates(const Matrix& big, const Matrix& small) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(big - small), Eigen::EigenvaluesOnly).eigenvalues().minCoeff() >= 0.0;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Matrix sample_wishart(const Matrix& scale, int dof, std::mt19937_64& rng) {
    require_symmetric(scale, "Wishart scale");
    const Eigen::Index n = scale.rows();
    if (dof < n) throw InputError("Wishart degrees of freedom must be at least the dimension");
    const Eigen::LLT<Matrix> llt(scale);
    if (llt.info() != Eigen::Success) throw DefinitenessError("Wishart scale is not positive definite");

    std::normal_distribution<double> normal;
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(dof - i));
        a(i, i) = std::sqrt(chi2(rng));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
    }
    const Matrix la = llt.matrixL() * a;
    return symmetrize(la * la.transpose());
}

// ---------------------------------------------------------------------------

std::vector<ConvergenceSummary> run_convergence_study(const ConvergenceStudyConfig& cfg) {
    if (cfg.trials < 1) throw InputError("trials must be at least 1");
    if (cfg.nx < 1) throw InputError("nx must be positive");
    for (const int m : cfg.ms)
        if (m < 1 || m > cfg.nx) throw InputError("m must satisfy 1 <= m <= nx");

    const std::size_t trials = static_cast<std::size_t>(cfg.trials);
    const std::size_t nm = cfg.ms.size();
    std::vector<int> iterations(trials * nm, 0);
    std::vector<char> truncated(trials * nm, 0);
    std::vector<double> increase(trials * nm, 0.0);
    const Matrix identity = Matrix::Identity(cfg.nx, cfg.nx);
    const GevoCiConfig ci{0.5, cfg.epsilon, cfg.max_iters};

    for_each_chunk(trials, cfg.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            std::mt19937_64 rng(derive_seed(cfg.seed, t));
            Matrix r1 = sample_wishart(identity, cfg.nx, rng);
            const Matrix r2 = sample_wishart(identity, cfg.nx, rng);
            while (cfg.resample && dominates(r2, r1)) r1 = sample_wishart(identity, cfg.nx, rng);
            for (std::size_t k = 0; k < nm; ++k) {
                const GevoCiResult res = gevo_ci(r1, r2, identity, cfg.ms[k], ci);
                const std::size_t slot = t * nm + k;
                iterations[slot] = res.trace.iterations;
                truncated[slot] = res.trace.truncated ? 1 : 0;
                double prev = r1.trace();
                double worst = -std::numeric_limits<double>::infinity();
                for (const double j : res.trace.j_values) {
                    worst = std::max(worst, (j - prev) / prev);
                    prev = j;
                }
                increase[slot] = worst;
            }
        }
    });

    std::vector<ConvergenceSummary> out;
    for (std::size_t k = 0; k < nm; ++k) {
        ConvergenceSummary s;
        s.m = cfg.ms[k];
        s.worst_increase = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const int it = iterations[t * nm + k];
            ++s.histogram[it];
            sum += it;
            sum_sq += static_cast<double>(it) * it;
            s.truncated += truncated[t * nm + k];
            s.worst_increase = std::max(s.worst_increase, increase[t * nm + k]);
        }
        const double n = static_cast<double>(trials);
        s.mean = sum / n;
        s.std = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean * s.mean) / (n - 1.0))) : 0.0;
        long best = -1;
        for (const auto& [value, count] : s.histogram)
            if (count > best) {
                best = count;
                s.typical = value;
            }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

RhoConfig RhoConfig::defaults() {
    RhoConfig cfg;
    for (int i = 0; i < 100; ++i) cfg.rhos.push_back(i / 100.0);
    return cfg;
}

Matrix rho_common_information() {
    Matrix g(6, 6);
    g << 16, 4, 4, 0, -2, 0,
         4, 20, 8, -8, -4, -4,
         4, 8, 30, 0, -4, -4,
         0, -8, 0, 50, 0, 0,
         -2, -4, -4, 0, 10, 0,
         0, -4, -4, 0, 0, 20;
    return g;
}

RhoMatrices rho_matrices(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InputError("rho must lie in [0, 1]");
    Vector a(6), b(6);
    a << 64, 32, 16, 8, 4, 2;
    b << 5, 8, 13, 21, 34, 55;
    const Matrix gamma = rho_common_information();
    RhoMatrices out;
    out.r1 = inverse_pd((1.0 - rho) * Matrix(a.asDiagonal()) + rho * gamma, "R1 information");
    out.r2 = inverse_pd((1.0 - rho) * Matrix(b.asDiagonal()) + rho * gamma, "R2 information");
    out.r12 = rho * out.r1 * gamma * out.r2;
    if (rho < 1.0) out.r2_decorrelated = Matrix((b * (1.0 - rho)).cwiseInverse().asDiagonal());
    return out;
}

std::vector<RhoRow> run_rho_example(const RhoConfig& cfg) {
    const Matrix identity = Matrix::Identity(6, 6);
    std::vector<RhoRow> rows;
    for (const double rho : cfg.rhos) {
        for (const int m : cfg.ms) {
            for (const char* method : {"dkf", "ci", "le", "nkf"}) {
                RhoRow row;
                row.rho = rho;
                row.method = method;
                row.m = m;
                try {
                    const RhoMatrices mats = rho_matrices(rho);
                    const Estimate local{Vector::Zero(6), mats.r1};
                    const Estimate remote_full{Vector::Zero(6), mats.r2};
                    const Matrix ref_map = gevo({mats.r1, mats.r2, mats.r12, identity, m});
                    const Matrix p_ref =
                        fuse_bsc(local, ReducedEstimate::from_full(remote_full, ref_map), identity, mats.r12).cov;

                    Matrix p;
                    Matrix p_true;
                    const std::string name = method;
                    if (name == "dkf") {
                        if (mats.r2_decorrelated.size() == 0) throw DegenerateError("decorrelated estimate is uninformative");
                        const Matrix map = gevo_kf(mats.r1, mats.r2_decorrelated, identity, m);
                        const Estimate decor{Vector::Zero(6), mats.r2_decorrelated};
                        const ReducedEstimate remote = ReducedEstimate::from_full(decor, map);
                        const FusedEstimate f = fuse_kf(local, remote, identity);
                        p = f.cov;
                        p_true = rule_error_cov(linear_rule(*f.gain, remote, identity), map, mats.r1,
                                                mats.r2_decorrelated, Matrix::Zero(6, 6));
                    } else if (name == "nkf") {
                        const Matrix map = gevo_kf(mats.r1, mats.r2, identity, m);
                        const ReducedEstimate remote = ReducedEstimate::from_full(remote_full, map);
                        const FusedEstimate f = fuse_kf(local, remote, identity);
                        p = f.cov;
                        p_true = rule_error_cov(linear_rule(*f.gain, remote, identity), map, mats.r1, mats.r2, mats.r12);
                    } else if (name == "ci") {
                        const GevoCiResult map = gevo_ci(mats.r1, mats.r2, identity, m);
                        const ReducedEstimate remote = ReducedEstimate::from_full(remote_full, map.map);
                        const FusedEstimate f =
                            fuse_ci(local, remote, identity, optimize_ci_omega(mats.r1, remote, identity));
                        p = f.cov;
                        p_true =
                            rule_error_cov(linear_rule(*f.gain, remote, identity), map.map, mats.r1, mats.r2, mats.r12);
                    } else {
                        const Matrix map = gevo_le(mats.r1, mats.r2, identity, m);
                        const ReducedEstimate remote = ReducedEstimate::from_full(remote_full, map);
                        p = fuse_le(local, remote, identity).cov;
                        p_true = rule_error_cov(le_gains(mats.r1, remote, identity), map, mats.r1, mats.r2, mats.r12);
                    }
                    row.coin = coin(p, p_true);
                    row.anees = anees(p, p_true);
                    row.rmtr = rmtr(p, p_ref);
                } catch (const Error& e) {
                    row.ok = false;
                    row.note = e.what();
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

std::pair<Matrix, Matrix> cvm_model(double ts, double sigma_w) {
    if (!(ts > 0.0)) throw InputError("sampling time must be positive");
    if (!(sigma_w >= 0.0)) throw InputError("process noise must be non-negative");
    const Matrix i2 = Matrix::Identity(2, 2);
    Matrix f = Matrix::Identity(4, 4);
    f.topRightCorner(2, 2) = ts * i2;
    Matrix q(4, 4);
    q << ts * ts * ts / 3.0 * i2, ts * ts / 2.0 * i2, ts * ts / 2.0 * i2, ts * i2;
    return {f, sigma_w * sigma_w * q};
}

Estimate cvm_predict(const Estimate& e, double ts, double sigma_w) {
    const auto [f, q] = cvm_model(ts, sigma_w);
    if (e.mean.size() != 4 || e.cov.rows() != 4) throw DimensionError("constant-velocity state has dimension 4");
    return {f * e.mean, symmetrize(f * e.cov * f.transpose() + q)};
}

Estimate kf_update(const Estimate& e, const Vector& z, const Matrix& c, const Matrix& h_meas) {
    if (h_meas.cols() != e.mean.size() || h_meas.rows() != z.size() || c.rows() != z.size())
        throw DimensionError("measurement model does not match the state");
    const Matrix s = symmetrize(h_meas * e.cov * h_meas.transpose() + c);
    const Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw DefinitenessError("innovation covariance is not positive definite");
    const Matrix gain = llt.solve(h_meas * e.cov).transpose();
    const Eigen::Index n = e.mean.size();
    const Matrix joseph = Matrix::Identity(n, n) - gain * h_meas;
    return {e.mean + gain * (z - h_meas * e.mean),
            symmetrize(joseph * e.cov * joseph.transpose() + gain * c * gain.transpose())};
}

DttConfig DttConfig::defaults() {
    DttConfig cfg;
    Matrix c1(2, 2), c2(2, 2), c3(2, 2);
    c1 << 100, 0, 0, 10;
    c2 << 33, 39, 39, 78;
    c3 << 33, -39, -39, 78;
    cfg.meas_covs = {c1, c2, c3};
    cfg.p0_diag.resize(4);
    cfg.p0_diag << 1e4, 1e4, 1e2, 1e2;
    return cfg;
}

std::vector<std::string> dtt_methods() {
    return {"nkf", "ci", "le", "nkf-pco", "ci-pco", "le-pco", "nkf-full", "ci-full", "le-full", "dca-eig"};
}

namespace {

struct FusionEvent {
    int step = 0;
    int sender = 0;
    int receiver = 0;
    Matrix local_gain;
    Matrix remote_gain;  // K_M M, acting on the sender's full estimate
    Matrix cov;
};

struct MethodPlan {
    std::string name;
    std::vector<std::vector<Matrix>> kf_gains;  // [step][agent]
    std::vector<FusionEvent> events;             // in execution order
};

struct FusionOutcome {
    LinearRule rule;
    Matrix map;
    Matrix cov;
};

FusionOutcome fuse_for_method(const std::string& method, const Matrix& r1, const Matrix& r2, int m) {
    const Eigen::Index n = r1.rows();
    const Matrix identity = Matrix::Identity(n, n);
    const std::string family = method.substr(0, method.find('-'));
    const std::string variant = method.find('-') == std::string::npos ? "gevo" : method.substr(method.find('-') + 1);
    const Estimate local{Vector::Zero(n), r1};

    if (method == "dca-eig") {
        const ReducedEstimate remote{Vector::Zero(n), dca_eig(r2).cov, identity};
        const FusedEstimate f = fuse_ci(local, remote, identity, optimize_ci_omega(r1, remote, identity));
        return {linear_rule(*f.gain, remote, identity), identity, f.cov};
    }

    Matrix map;
    if (variant == "full") {
        map = identity;
    } else if (variant == "pco") {
        map = pco(r2, m);
    } else if (family == "nkf") {
        map = gevo_kf(r1, r2, identity, m);
    } else if (family == "ci") {
        map = gevo_ci(r1, r2, identity, m).map;
    } else {
        map = gevo_le(r1, r2, identity, m);
    }
    const ReducedEstimate remote = ReducedEstimate::from_full({Vector::Zero(n), r2}, map);
    if (family == "nkf") {
        const FusedEstimate f = fuse_kf(local, remote, identity);
        return {linear_rule(*f.gain, remote, identity), map, f.cov};
    }
    if (family == "ci") {
        const FusedEstimate f = fuse_ci(local, remote, identity, optimize_ci_omega(r1, remote, identity));
        return {linear_rule(*f.gain, remote, identity), map, f.cov};
    }
    return {le_gains(r1, remote, identity), map, fuse_le(local, remote, identity).cov};
}

MethodPlan build_plan(const std::string& method, const DttConfig& cfg, const Matrix& f, const Matrix& q,
                      const Matrix& h_meas) {
    const int agents = cfg.agents();
    MethodPlan plan;
    plan.name = method;
    std::vector<Matrix> covs;
    for (int a = 0; a < agents; ++a) {
        Matrix p0 = Matrix::Zero(4, 4);
        p0.topLeftCorner(2, 2) = cfg.meas_covs[static_cast<std::size_t>(a)];
        p0.bottomRightCorner(2, 2) = cfg.init_velocity_var * Matrix::Identity(2, 2);
        covs.push_back(p0);
    }
    plan.kf_gains.resize(static_cast<std::size_t>(cfg.steps) + 1);
    for (int k = 1; k <= cfg.steps; ++k) {
        auto& gains = plan.kf_gains[static_cast<std::size_t>(k)];
        for (int a = 0; a < agents; ++a) {
            Matrix& p = covs[static_cast<std::size_t>(a)];
            p = symmetrize(f * p * f.transpose() + q);
            const Matrix& c = cfg.meas_covs[static_cast<std::size_t>(a)];
            const Matrix s = symmetrize(h_meas * p * h_meas.transpose() + c);
            const Matrix gain = Eigen::LLT<Matrix>(s).solve(h_meas * p).transpose();
            const Matrix joseph = Matrix::Identity(4, 4) - gain * h_meas;
            p = symmetrize(joseph * p * joseph.transpose() + gain * c * gain.transpose());
            gains.push_back(gain);
        }
        const std::vector<Matrix> sent = covs;
        for (const auto& [sender, receiver] : cfg.edges) {
            if ((k - sender) % agents != 0 || k < sender) continue;
            const FusionOutcome out = fuse_for_method(method, covs[static_cast<std::size_t>(receiver - 1)],
                                                      sent[static_cast<std::size_t>(sender - 1)], cfg.m);
            plan.events.push_back({k, sender, receiver, out.rule.local_gain, out.rule.remote_gain * out.map, out.cov});
            covs[static_cast<std::size_t>(receiver - 1)] = out.cov;
        }
    }
    return plan;
}

}  // namespace

std::vector<DttRow> run_dtt(const DttConfig& cfg) {
    const int agents = cfg.agents();
    if (agents < 2) throw InputError("at least two agents are required");
    if (cfg.runs < 1 || cfg.steps < 1) throw InputError("runs and steps must be positive");
    if (cfg.m < 1 || cfg.m > 4) throw InputError("m must satisfy 1 <= m <= 4");
    if (cfg.p0_diag.size() != 4 || (cfg.p0_diag.array() < 0.0).any()) throw InputError("P0 must be a non-negative 4-vector");
    for (const Matrix& c : cfg.meas_covs) {
        if (c.rows() != 2 || c.cols() != 2) throw DimensionError("measurement covariances must be 2 x 2");
        if (!is_pd(c)) throw DefinitenessError("measurement covariance is not positive definite");
    }
    for (const auto& [s, r] : cfg.edges)
        if (s < 1 || s > agents || r < 1 || r > agents || s == r) throw InputError("invalid communication edge");

    const auto [f, q] = cvm_model(cfg.ts, cfg.sigma_w);
    Matrix h_meas = Matrix::Zero(2, 4);
    h_meas(0, 0) = 1.0;
    h_meas(1, 1) = 1.0;
    const Matrix q_factor = psd_factor(q);
    const Vector p0_sqrt = cfg.p0_diag.cwiseSqrt();
    std::vector<Matrix> meas_factors;
    for (const Matrix& c : cfg.meas_covs) meas_factors.push_back(Eigen::LLT<Matrix>(c).matrixL());

    std::vector<MethodPlan> plans;
    for (const std::string& method : dtt_methods()) plans.push_back(build_plan(method, cfg, f, q, h_meas));

    const std::size_t runs = static_cast<std::size_t>(cfg.runs);
    const std::size_t chunks = (runs + kChunkSize - 1) / kChunkSize;
    // acc[chunk][method][event]
    std::vector<std::vector<std::vector<ErrorMoments>>> acc(chunks);
    for (auto& per_chunk : acc)
        for (const MethodPlan& plan : plans) per_chunk.emplace_back(plan.events.size(), ErrorMoments(4));

    for_each_chunk(runs, cfg.threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        auto& local_acc = acc[chunk];
        std::vector<Vector> truth(static_cast<std::size_t>(cfg.steps) + 1);
        std::vector<std::vector<Vector>> z(static_cast<std::size_t>(cfg.steps) + 1);
        for (std::size_t run = begin; run < end; ++run) {
            std::mt19937_64 rng(derive_seed(cfg.seed, run));
            truth[0] = p0_sqrt.cwiseProduct(standard_normal(4, rng));
            for (int k = 1; k <= cfg.steps; ++k)
                truth[static_cast<std::size_t>(k)] = f * truth[static_cast<std::size_t>(k - 1)] + q_factor * standard_normal(4, rng);
            for (int k = 0; k <= cfg.steps; ++k) {
                auto& zk = z[static_cast<std::size_t>(k)];
                zk.clear();
                for (int a = 0; a < agents; ++a)
                    zk.push_back(h_meas * truth[static_cast<std::size_t>(k)] +
                                 meas_factors[static_cast<std::size_t>(a)] * standard_normal(2, rng));
            }

            for (std::size_t p = 0; p < plans.size(); ++p) {
                const MethodPlan& plan = plans[p];
                std::vector<Vector> x(static_cast<std::size_t>(agents), Vector::Zero(4));
                for (int a = 0; a < agents; ++a) x[static_cast<std::size_t>(a)].head(2) = z[0][static_cast<std::size_t>(a)];
                std::size_t e = 0;
                for (int k = 1; k <= cfg.steps; ++k) {
                    const auto sk = static_cast<std::size_t>(k);
                    for (int a = 0; a < agents; ++a) {
                        const auto sa = static_cast<std::size_t>(a);
                        Vector& xa = x[sa];
                        xa = f * xa;
                        xa += plan.kf_gains[sk][sa] * (z[sk][sa] - h_meas * xa);
                    }
                    const std::vector<Vector> sent = x;
                    for (; e < plan.events.size() && plan.events[e].step == k; ++e) {
                        const FusionEvent& ev = plan.events[e];
                        Vector& xr = x[static_cast<std::size_t>(ev.receiver - 1)];
                        xr = ev.local_gain * xr + ev.remote_gain * sent[static_cast<std::size_t>(ev.sender - 1)];
                        local_acc[p][e].add(xr - truth[sk]);
                    }
                }
            }
        }
    });

    std::vector<std::vector<ErrorMoments>> total;
    for (const MethodPlan& plan : plans) total.emplace_back(plan.events.size(), ErrorMoments(4));
    for (const auto& per_chunk : acc)
        for (std::size_t p = 0; p < plans.size(); ++p)
            for (std::size_t e = 0; e < plans[p].events.size(); ++e) total[p][e].merge(per_chunk[p][e]);

    const auto reference = [&](const std::string& name) -> std::size_t {
        const std::string family = name == "dca-eig" ? "ci" : name.substr(0, name.find('-'));
        for (std::size_t p = 0; p < plans.size(); ++p)
            if (plans[p].name == family + "-full") return p;
        return 0;
    };

    std::vector<DttRow> rows;
    for (std::size_t p = 0; p < plans.size(); ++p) {
        const MethodPlan& plan = plans[p];
        const MethodPlan& ref = plans[reference(plan.name)];
        const bool full = plan.name.ends_with("-full") || plan.name == "dca-eig";
        for (std::size_t e = 0; e < plan.events.size(); ++e) {
            const FusionEvent& ev = plan.events[e];
            const Matrix p_hat = total[p][e].second_moment();
            const Vector mean = total[p][e].mean();
            DttRow row;
            row.agent = ev.receiver;
            row.step = ev.step;
            row.method = plan.name;
            row.m = full ? 4 : cfg.m;
            row.coin = coin(ev.cov, p_hat);
            row.anees = anees(ev.cov, p_hat);
            row.rmtr = rmtr(ev.cov, ref.events[e].cov);
            row.trace = ev.cov.trace();
            const Vector se = (p_hat.diagonal() / static_cast<double>(runs)).cwiseSqrt();
            row.mean_error_z = (mean.cwiseAbs().array() / se.array().max(1e-300)).maxCoeff();
            rows.push_back(std::move(row));
        }
    }
    const auto order = dtt_methods();
    const auto rank = [&](const std::string& name) { return std::find(order.begin(), order.end(), name) - order.begin(); };
    std::stable_sort(rows.begin(), rows.end(), [&](const DttRow& a, const DttRow& b) {
        if (a.agent != b.agent) return a.agent < b.agent;
        if (a.step != b.step) return a.step < b.step;
        return rank(a.method) < rank(b.method);
    });
    return rows;
}

}  // namespace drfuse
