#include "drfuse/cli.hpp"

#include "drfuse/codec.hpp"
#include "drfuse/csv_io.hpp"
#include "drfuse/errors.hpp"
#include "drfuse/fusion.hpp"
#include "drfuse/reduction.hpp"
#include "drfuse/scenarios.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

namespace drfuse {
namespace {

using json = nlohmann::json;

struct Options {
    std::string method;
    std::string r1, r2, r12, h, y1, y2, reduced, in, out, config, format = "hex";
    std::optional<int> m;
    std::optional<long> n2;
    std::optional<double> tau;
    std::optional<double> epsilon;
    std::optional<double> omega;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<int> steps;
    std::optional<int> nx;
    int threads = 1;
    int agent = 3;
    bool no_resample = false;
};

// Writes to --out when given, else to the caller's stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback, bool binary = false) : os_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, binary ? std::ios::binary : std::ios::out);
            if (!*file_) throw ParseError("cannot open '" + path + "' for writing");
            os_ = file_.get();
        }
    }
    std::ostream& stream() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

std::uint64_t resolve_seed(const Options& o) {
    if (o.seed) return *o.seed;
    if (const char* env = std::getenv("DRFUSE_SEED")) {
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(env, &pos);
            if (pos == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw CLI::ValidationError("DRFUSE_SEED", "must be an unsigned integer");
    }
    return 1;
}

json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

Matrix json_matrix(const json& j) {
    Matrix a(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != static_cast<std::size_t>(a.cols())) throw ParseError("ragged matrix in config");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return a;
}

Matrix require_matrix(const std::string& path, const char* flag) {
    if (path.empty()) throw CLI::RequiredError(flag);
    return read_matrix_csv(path);
}

Matrix observation_or_identity(const Options& o, Eigen::Index n2, Eigen::Index nx) {
    if (!o.h.empty()) return read_matrix_csv(o.h);
    if (n2 != nx) throw DimensionError("--h is required when R1 and R2 differ in size");
    return Matrix::Identity(n2, nx);
}

int cmd_reduce(const Options& o, std::ostream& out) {
    const Matrix r2 = require_matrix(o.r2, "--r2");
    const bool remote_only = o.method == "pco" || o.method == "dca-eig";
    const Matrix r1 = remote_only && o.r1.empty() ? Matrix::Identity(r2.rows(), r2.rows()) : require_matrix(o.r1, "--r1");
    const Matrix h = observation_or_identity(o, r2.rows(), r1.rows());
    const Matrix r12 = o.r12.empty() ? Matrix::Zero(r1.rows(), r2.rows()) : read_matrix_csv(o.r12);
    Sink sink(o.out, out);

    if (o.method == "dca-eig") {
        write_matrix_csv(sink.stream(), dca_eig(r2).cov);
        return kExitOk;
    }
    if (o.method == "pco" && !o.m) throw CLI::RequiredError("--m");

    Eigen::Index m = 0;
    if (o.m) {
        m = *o.m;
    } else if (o.tau) {
        const Matrix q_r12 = o.method == "gevo" ? r12 : Matrix::Zero(r1.rows(), r2.rows());
        const RankSelection sel = select_m(loss_ladder({r1, r2, q_r12, h, 1}), *o.tau);
        if (sel.degenerate) throw DegenerateError("no informative direction to select");
        m = sel.m;
    } else {
        throw CLI::RequiredError("--m or --tau");
    }

    Matrix map;
    if (o.method == "gevo") {
        map = gevo({r1, r2, r12, h, m});
    } else if (o.method == "gevo-kf") {
        map = gevo_kf(r1, r2, h, m);
    } else if (o.method == "gevo-ci") {
        GevoCiConfig cfg;
        if (o.epsilon) cfg.epsilon = *o.epsilon;
        map = gevo_ci(r1, r2, h, m, cfg).map;
    } else if (o.method == "gevo-le") {
        map = gevo_le(r1, r2, h, m);
    } else if (o.method == "pco") {
        map = pco(r2, m);
    } else {
        throw CLI::ValidationError("--method", "reduce accepts gevo, gevo-kf, gevo-ci, gevo-le, pco, dca-eig");
    }

    if (o.y2.empty()) {
        write_matrix_csv(sink.stream(), map);
    } else {
        ReducedEstimate e = ReducedEstimate::from_full({read_vector_csv(o.y2), r2}, map);
        e.cov = Matrix(e.cov.diagonal().asDiagonal());
        write_reduced_csv(sink.stream(), e);
    }
    return kExitOk;
}

int cmd_fuse(const Options& o, std::ostream& out) {
    const Matrix r1 = require_matrix(o.r1, "--r1");
    if (o.y1.empty()) throw CLI::RequiredError("--y1");
    const Estimate local{read_vector_csv(o.y1), r1};

    ReducedEstimate remote;
    Matrix r2;
    if (!o.reduced.empty()) {
        remote = read_reduced_csv(o.reduced);
    } else {
        r2 = require_matrix(o.r2, "--r2 or --reduced");
        if (o.y2.empty()) throw CLI::RequiredError("--y2");
        remote = ReducedEstimate::identity({read_vector_csv(o.y2), r2});
    }
    const Matrix h = observation_or_identity(o, remote.map.cols(), r1.rows());

    FusedEstimate fused;
    if (o.method == "bsc") {
        const Matrix r12 = require_matrix(o.r12, "--r12");
        fused = fuse_bsc(local, remote, h, r12);
    } else if (o.method == "kf" || o.method == "nkf") {
        fused = fuse_kf(local, remote, h);
    } else if (o.method == "ci") {
        const CiWeight w = o.omega ? CiWeight(*o.omega) : optimize_ci_omega(r1, remote, h);
        fused = fuse_ci(local, remote, h, w);
    } else if (o.method == "le") {
        fused = fuse_le(local, remote, h);
    } else if (o.method == "dca-eig") {
        if (o.reduced.empty()) remote.cov = dca_eig(r2).cov;
        fused = fuse_ci(local, remote, h, o.omega ? CiWeight(*o.omega) : optimize_ci_omega(r1, remote, h));
    } else {
        throw CLI::ValidationError("--method", "fuse accepts bsc, kf, nkf, ci, le, dca-eig");
    }

    Matrix table(fused.mean.size(), fused.mean.size() + 1);
    table.col(0) = fused.mean;
    table.rightCols(fused.mean.size()) = fused.cov;
    Sink sink(o.out, out);
    write_matrix_csv(sink.stream(), table);
    return kExitOk;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    std::ostringstream ss;
    ss << std::hex << std::setfill('0');
    for (const auto b : bytes) ss << std::setw(2) << static_cast<int>(b);
    return ss.str();
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
    std::string digits;
    for (const char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) digits.push_back(c);
    if (digits.size() % 2 != 0) throw ParseError("hex message has an odd number of digits");
    std::vector<std::uint8_t> out;
    for (std::size_t k = 0; k < digits.size(); k += 2) {
        const std::string pair = digits.substr(k, 2);
        if (!std::isxdigit(static_cast<unsigned char>(pair[0])) || !std::isxdigit(static_cast<unsigned char>(pair[1])))
            throw ParseError("hex message contains a non-hex character");
        out.push_back(static_cast<std::uint8_t>(std::stoi(pair, nullptr, 16)));
    }
    return out;
}

int cmd_encode(const Options& o, std::ostream& out) {
    if (o.reduced.empty()) throw CLI::RequiredError("--reduced");
    const std::vector<std::uint8_t> bytes = serialize(encode(read_reduced_csv(o.reduced)));
    const bool binary = o.format == "bin";
    Sink sink(o.out, out, binary);
    if (binary) {
        sink.stream().write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    } else {
        sink.stream() << to_hex(bytes) << '\n';
    }
    return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out) {
    if (o.in.empty()) throw CLI::RequiredError("--in");
    const std::string raw = read_text_file(o.in);
    std::vector<std::uint8_t> bytes;
    if (o.format == "bin") {
        bytes.assign(raw.begin(), raw.end());
    } else {
        bytes = from_hex(raw);
    }
    Sink sink(o.out, out);
    write_reduced_csv(sink.stream(), decode(deserialize(bytes)));
    return kExitOk;
}

int cmd_cost(const Options& o, std::ostream& out) {
    if (!o.n2) throw CLI::RequiredError("--n2");
    std::vector<long> ms;
    if (o.m) {
        ms.push_back(*o.m);
    } else {
        for (long m = 1; m <= *o.n2; ++m) ms.push_back(m);
    }
    Sink sink(o.out, out);
    std::ostream& os = sink.stream();
    os << "n2,m,n_dr,n_full,n_dca,n_excl,ratio,savings_pct,extra_bits_pct\n";
    for (const long m : ms) {
        const CostReport r = cost_report(*o.n2, m);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%ld,%ld,%ld,%ld,%ld,%ld,%.3f,%.1f,%.2f\n", r.n2, r.m, r.n_dr, r.n_full, r.n_dca,
                      r.n_excl, r.ratio, 100.0 * (1.0 - r.ratio), 100.0 * r.extra_bits_ratio);
        os << buf;
    }
    return kExitOk;
}

int cmd_rho(const Options& o, std::ostream& out) {
    const json cfg = read_config(o.config);
    RhoConfig rc = RhoConfig::defaults();
    if (cfg.contains("rhos")) rc.rhos = cfg["rhos"].get<std::vector<double>>();
    if (cfg.contains("rho_count")) {
        const double lo = cfg.value("rho_min", 0.0);
        const double hi = cfg.value("rho_max", 0.99);
        const int count = cfg["rho_count"].get<int>();
        if (count < 1) throw InputError("rho_count must be positive");
        rc.rhos.clear();
        for (int i = 0; i < count; ++i) rc.rhos.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }
    if (cfg.contains("ms")) rc.ms = cfg["ms"].get<std::vector<int>>();
    if (o.m) rc.ms = {*o.m};

    std::vector<std::vector<std::string>> rows;
    for (const RhoRow& r : run_rho_example(rc)) {
        if (!r.ok) continue;
        rows.push_back({format_double(r.rho), r.method, std::to_string(r.m), format_double(r.coin),
                        format_double(r.anees), format_double(r.rmtr)});
    }
    Sink sink(o.out, out);
    write_results_csv(sink.stream(), {"rho", "method", "m", "coin", "anees", "rmtr"}, rows);
    return kExitOk;
}

int cmd_dtt(const Options& o, std::ostream& out) {
    const json cfg = read_config(o.config);
    DttConfig dc = DttConfig::defaults();
    dc.ts = cfg.value("ts", dc.ts);
    dc.sigma_w = cfg.value("sigma_w", dc.sigma_w);
    dc.runs = cfg.value("runs", dc.runs);
    dc.steps = cfg.value("steps", dc.steps);
    dc.m = cfg.value("m", dc.m);
    dc.seed = cfg.value("seed", resolve_seed(o));
    dc.init_velocity_var = cfg.value("init_velocity_var", dc.init_velocity_var);
    if (cfg.contains("meas_covs")) {
        dc.meas_covs.clear();
        for (const auto& c : cfg["meas_covs"]) dc.meas_covs.push_back(json_matrix(c));
    }
    if (cfg.contains("edges")) dc.edges = cfg["edges"].get<std::vector<std::pair<int, int>>>();
    if (cfg.contains("p0_diag")) {
        const auto p0 = cfg["p0_diag"].get<std::vector<double>>();
        dc.p0_diag = Eigen::Map<const Vector>(p0.data(), static_cast<Eigen::Index>(p0.size()));
    }
    if (o.runs) dc.runs = *o.runs;
    if (o.steps) dc.steps = *o.steps;
    if (o.m) dc.m = *o.m;
    if (o.seed) dc.seed = *o.seed;
    dc.threads = o.threads;
    if (o.agent < 0 || o.agent > dc.agents()) throw InputError("--agent is out of range");

    std::vector<std::vector<std::string>> rows;
    for (const DttRow& r : run_dtt(dc)) {
        if (o.agent != 0 && r.agent != o.agent) continue;
        std::vector<std::string> row{std::to_string(r.step), r.method, std::to_string(r.m), format_double(r.coin),
                                     format_double(r.anees), format_double(r.rmtr)};
        if (o.agent == 0) row.insert(row.begin(), std::to_string(r.agent));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"step", "method", "m", "coin", "anees", "rmtr"};
    if (o.agent == 0) header.insert(header.begin(), "agent");
    Sink sink(o.out, out);
    write_results_csv(sink.stream(), header, rows);
    return kExitOk;
}

int cmd_convergence(const Options& o, std::ostream& out) {
    const json cfg = read_config(o.config);
    ConvergenceStudyConfig cc;
    cc.nx = cfg.value("nx", cc.nx);
    cc.epsilon = cfg.value("epsilon", cc.epsilon);
    cc.trials = cfg.value("trials", cc.trials);
    cc.resample = cfg.value("resample", cc.resample);
    cc.max_iters = cfg.value("max_iters", cc.max_iters);
    if (cfg.contains("ms")) cc.ms = cfg["ms"].get<std::vector<int>>();
    cc.seed = cfg.value("seed", resolve_seed(o));
    if (o.nx) cc.nx = *o.nx;
    if (o.epsilon) cc.epsilon = *o.epsilon;
    if (o.runs) cc.trials = *o.runs;
    if (o.m) cc.ms = {*o.m};
    if (o.seed) cc.seed = *o.seed;
    if (o.no_resample) cc.resample = false;
    cc.threads = o.threads;

    Sink sink(o.out, out);
    std::ostream& os = sink.stream();
    os << "m,typical,mean,std,truncated,histogram\n";
    for (const ConvergenceSummary& s : run_convergence_study(cc)) {
        std::string hist;
        for (const auto& [it, count] : s.histogram) hist += (hist.empty() ? "" : " ") + std::to_string(it) + ":" + std::to_string(count);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d,%d,%.3f,%.3f,%ld,", s.m, s.typical, s.mean, s.std, s.truncated);
        os << buf << hist << '\n';
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dimension-reduced estimate fusion toolkit", "drfuse"};
    app.require_subcommand(1, 1);
    // "-h" is taken by the observation-model flag.
    app.set_help_flag("--help", "Print this help message and exit");
    Options o;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "Output file (default stdout)");
    };
    const auto add_seeded = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Master seed (fallback: DRFUSE_SEED)");
        sub->add_option("--runs", o.runs, "Monte Carlo runs or trials");
        sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--config", o.config, "JSON scenario config")->check(CLI::ExistingFile);
    };

    auto* reduce = app.add_subcommand("reduce", "Compute a dimension-reducing map");
    reduce->set_help_flag("--help", "Print this help message and exit");
    reduce->add_option("--method", o.method)->required()->check(
        CLI::IsMember({"gevo", "gevo-kf", "gevo-ci", "gevo-le", "pco", "dca-eig"}));
    reduce->add_option("--r1", o.r1, "Local covariance CSV");
    reduce->add_option("--r2", o.r2, "Remote covariance CSV")->required();
    reduce->add_option("--r12", o.r12, "Cross-covariance CSV");
    reduce->add_option("--h", o.h, "Observation model CSV (default I)");
    reduce->add_option("--y2", o.y2, "Remote mean CSV; output the reduced estimate instead of the map");
    reduce->add_option("--m", o.m)->check(CLI::PositiveNumber);
    reduce->add_option("--tau", o.tau, "Select m from the loss ladder");
    reduce->add_option("--epsilon", o.epsilon)->check(CLI::PositiveNumber);
    add_common(reduce);

    auto* fuse = app.add_subcommand("fuse", "Fuse a local estimate with a (reduced) remote estimate");
    fuse->set_help_flag("--help", "Print this help message and exit");
    fuse->add_option("--method", o.method)->required()->check(CLI::IsMember({"bsc", "kf", "nkf", "ci", "le", "dca-eig"}));
    fuse->add_option("--r1", o.r1)->required();
    fuse->add_option("--y1", o.y1)->required();
    fuse->add_option("--r2", o.r2);
    fuse->add_option("--y2", o.y2);
    fuse->add_option("--reduced", o.reduced, "Reduced estimate CSV (y, r, M)");
    fuse->add_option("--r12", o.r12);
    fuse->add_option("--h", o.h);
    fuse->add_option("--omega", o.omega, "Fixed CI weight");
    add_common(fuse);

    auto* enc = app.add_subcommand("encode", "Encode a reduced estimate as a wire message");
    enc->set_help_flag("--help", "Print this help message and exit");
    enc->add_option("--reduced", o.reduced)->required();
    enc->add_option("--format", o.format)->check(CLI::IsMember({"hex", "bin"}));
    add_common(enc);

    auto* dec = app.add_subcommand("decode", "Decode a wire message");
    dec->set_help_flag("--help", "Print this help message and exit");
    dec->add_option("--in", o.in)->required();
    dec->add_option("--format", o.format)->check(CLI::IsMember({"hex", "bin"}));
    add_common(dec);

    auto* cost = app.add_subcommand("cost", "Communication cost table");
    cost->set_help_flag("--help", "Print this help message and exit");
    cost->add_option("--n2", o.n2)->required()->check(CLI::PositiveNumber);
    cost->add_option("--m", o.m)->check(CLI::PositiveNumber);
    add_common(cost);

    auto* rho = app.add_subcommand("rho-example", "Correlated fusion example over rho");
    rho->set_help_flag("--help", "Print this help message and exit");
    rho->add_option("--config", o.config)->check(CLI::ExistingFile);
    rho->add_option("--m", o.m)->check(CLI::PositiveNumber);
    add_common(rho);

    auto* dtt = app.add_subcommand("dtt", "Decentralized target tracking Monte Carlo");
    dtt->set_help_flag("--help", "Print this help message and exit");
    add_seeded(dtt);
    dtt->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
    dtt->add_option("--m", o.m)->check(CLI::PositiveNumber);
    dtt->add_option("--agent", o.agent, "Agent to report (0 = all)");
    add_common(dtt);

    auto* conv = app.add_subcommand("convergence", "Iteration counts of the alternating CI map search");
    conv->set_help_flag("--help", "Print this help message and exit");
    add_seeded(conv);
    conv->add_option("--nx", o.nx)->check(CLI::PositiveNumber);
    conv->add_option("--m", o.m)->check(CLI::PositiveNumber);
    conv->add_option("--epsilon", o.epsilon)->check(CLI::PositiveNumber);
    conv->add_flag("--no-resample", o.no_resample, "Keep samples with R2 >= R1");
    add_common(conv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (reduce->parsed()) return cmd_reduce(o, out);
        if (fuse->parsed()) return cmd_fuse(o, out);
        if (enc->parsed()) return cmd_encode(o, out);
        if (dec->parsed()) return cmd_decode(o, out);
        if (cost->parsed()) return cmd_cost(o, out);
        if (rho->parsed()) return cmd_rho(o, out);
        if (dtt->parsed()) return cmd_dtt(o, out);
        if (conv->parsed()) return cmd_convergence(o, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const json::exception& e) {
        err << "error: config: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace drfuse
