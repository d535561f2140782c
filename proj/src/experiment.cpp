#include "quantamp/experiment.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "quantamp/csv.hpp"
#include "quantamp/numerics.hpp"

namespace quantamp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) { return derive_seed(seed, tag); }

Quantizer quantizer_for(int bits, double sd) {
    return bits == 1 ? make_uniform_quantizer(1, 1.0) : make_calibrated_quantizer(bits, sd);
}

double sample_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

template <class T>
std::vector<T> one_or_many(const nlohmann::json& v) {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
}

}  // namespace

Method parse_method(const std::string& s) {
    if (s == "amp_pe") return Method::amp_pe;
    if (s == "amp_oracle") return Method::amp_oracle;
    if (s == "amp_awgn") return Method::amp_awgn;
    if (s == "qiht") return Method::qiht;
    throw std::invalid_argument("unknown method '" + s + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::amp_pe: return "amp_pe";
        case Method::amp_oracle: return "amp_oracle";
        case Method::amp_awgn: return "amp_awgn";
        case Method::qiht: return "qiht";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (N < 1) throw std::invalid_argument("config: N must be >= 1");
    if (!(sparsity > 0.0 && sparsity <= 1.0)) throw std::invalid_argument("config: sparsity must be in (0, 1]");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (bits < 1 || bits > 16) throw std::invalid_argument("config: bits must be in [1, 16]");
    if (!M && ratios.empty()) throw std::invalid_argument("config: need M or ratios");
    for (double r : ratios)
        if (!(r > 0.0)) throw std::invalid_argument("config: ratios must be positive");
    if (M && *M < 1) throw std::invalid_argument("config: M must be >= 1");
    if (snr_db.empty()) throw std::invalid_argument("config: snr_db must not be empty");
    if (methods.empty()) throw std::invalid_argument("config: no methods");
    if (components < 1 || components > kMaxComponents) throw std::invalid_argument("config: components must be in [1, 16]");
    if (!(init_kappa > 0.0 && init_kappa < 1.0)) throw std::invalid_argument("config: init_kappa must be in (0, 1)");
    if (!(init_gamma_w >= kVarFloor)) throw std::invalid_argument("config: init_gamma_w below floor");
    if (qiht_iters < 1) throw std::invalid_argument("config: qiht_iters must be >= 1");
    if (mc_samples < 1000) throw std::invalid_argument("config: mc_samples must be >= 1000");
    if (se_iters < 1) throw std::invalid_argument("config: se_iters must be >= 1");
    solver.validate();
}

std::vector<std::size_t> ExperimentConfig::measurement_counts() const {
    if (M) return {*M};
    std::vector<std::size_t> out;
    for (double r : ratios)
        out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r * static_cast<double>(N)))));
    return out;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    std::vector<std::string> methods;
    for (Method m : c.methods) methods.push_back(to_string(m));
    j = nlohmann::json{{"N", c.N},
                       {"ratios", c.ratios},
                       {"sparsity", c.sparsity},
                       {"distribution", to_string(c.dist)},
                       {"bits", c.bits},
                       {"snr_db", c.snr_db},
                       {"trials", c.trials},
                       {"seed", c.seed},
                       {"methods", methods},
                       {"matrix", to_string(c.matrix)},
                       {"components", c.components},
                       {"init_kappa", c.init_kappa},
                       {"init_gamma_w", c.init_gamma_w},
                       {"solver", c.solver},
                       {"qiht_step", c.qiht_step},
                       {"qiht_iters", c.qiht_iters},
                       {"mc_samples", c.mc_samples},
                       {"se_iters", c.se_iters}};
    if (c.M) j["M"] = *c.M;
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    static const char* known[] = {"N", "M", "ratios", "sparsity", "distribution", "bits", "snr_db", "trials",
                                  "seed", "method", "methods", "matrix", "components", "init_kappa",
                                  "init_gamma_w", "solver", "qiht_step", "qiht_iters", "mc_samples", "se_iters"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw std::invalid_argument("config: unknown field '" + key + "'");
    }
    c.N = j.value("N", c.N);
    if (j.contains("M")) c.M = j.at("M").get<std::size_t>();
    if (j.contains("ratios")) c.ratios = one_or_many<double>(j.at("ratios"));
    c.sparsity = j.value("sparsity", c.sparsity);
    if (j.contains("distribution")) c.dist = parse_dist(j.at("distribution").get<std::string>());
    c.bits = j.value("bits", c.bits);
    if (j.contains("snr_db")) c.snr_db = one_or_many<double>(j.at("snr_db"));
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    const char* mkey = j.contains("methods") ? "methods" : (j.contains("method") ? "method" : nullptr);
    if (mkey) {
        c.methods.clear();
        for (const auto& s : one_or_many<std::string>(j.at(mkey))) c.methods.push_back(parse_method(s));
    }
    if (j.contains("matrix")) c.matrix = parse_matrix_scale(j.at("matrix").get<std::string>());
    c.components = j.value("components", c.components);
    c.init_kappa = j.value("init_kappa", c.init_kappa);
    c.init_gamma_w = j.value("init_gamma_w", c.init_gamma_w);
    if (j.contains("solver")) c.solver = j.at("solver").get<SolverOptions>();
    c.qiht_step = j.value("qiht_step", c.qiht_step);
    c.qiht_iters = j.value("qiht_iters", c.qiht_iters);
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    c.se_iters = j.value("se_iters", c.se_iters);
    c.validate();
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t m, double snr_db, std::size_t trial) {
    const std::uint64_t cell = sub_seed(sub_seed(cfg.seed, m), std::bit_cast<std::uint64_t>(snr_db));
    return sub_seed(cell, trial);
}

Instance make_instance(const ExperimentConfig& cfg, std::size_t m, double snr_db, std::uint64_t ts) {
    std::vector<double> x = gen_signal(cfg.N, cfg.sparsity, cfg.dist, sub_seed(ts, 1));
    DenseOperator a = gen_matrix(m, cfg.N, cfg.matrix, sub_seed(ts, 2));
    std::vector<double> z(m);
    a.forward(x, z);
    const double gamma = calibrate_noise(z, snr_db);
    Rng rng(sub_seed(ts, 3));
    const double sd = std::sqrt(gamma);
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = z[i] + sd * rng.normal();
    Quantizer qz = quantizer_for(cfg.bits, sample_sd(v));
    std::vector<CellIndex> y = quantize(v, qz);
    return Instance{std::move(x), std::move(a), std::move(z), std::move(v), gamma, std::move(qz), std::move(y), ts};
}

TrialResult run_method(const ExperimentConfig& cfg, const Instance& inst, Method method, std::size_t trial,
                       double snr_db, SolverResult* full) {
    TrialResult tr{method, cfg.N, inst.A.rows(), snr_db, trial, kNaN, kNaN, 0, false, 0.0, inst.gamma_w,
                   kNaN, kNaN, std::nullopt};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> xhat;
    SolverResult res;
    bool solver_used = true;
    switch (method) {
        case Method::amp_pe: {
            SignalPrior p0 = init_prior_from_data(inst.A, dequantize(inst.y, inst.qz), cfg.components,
                                                  sub_seed(inst.seed, 4));
            p0.kappa = cfg.init_kappa;
            res = run_amp_pe(inst.A, inst.y, inst.qz, p0, NoisePrior{cfg.init_gamma_w}, cfg.solver, inst.x);
            break;
        }
        case Method::amp_oracle: {
            if (cfg.dist != NonzeroDist::gaussian)
                throw std::invalid_argument("amp_oracle needs Gaussian nonzeros (the true prior must be a BGM)");
            const double kappa = static_cast<double>(nonzero_count(cfg.N, cfg.sparsity)) / static_cast<double>(cfg.N);
            SolverOptions o = cfg.solver;
            o.estimate_lambda = false;
            o.estimate_theta = false;
            res = run_amp_pe(inst.A, inst.y, inst.qz, SignalPrior::bernoulli_gaussian(kappa, 1.0),
                             NoisePrior{inst.gamma_w}, o, inst.x);
            break;
        }
        case Method::amp_awgn: {
            const auto yd = dequantize_midpoint(inst.y, inst.qz);
            SignalPrior p0 = init_prior_from_data(inst.A, yd, cfg.components, sub_seed(inst.seed, 4));
            p0.kappa = cfg.init_kappa;
            res = amp_awgn_baseline(inst.A, inst.y, inst.qz, p0, NoisePrior{cfg.init_gamma_w}, cfg.solver, inst.x);
            break;
        }
        case Method::qiht:
            solver_used = false;
            xhat = qiht_baseline(inst.A, inst.y, inst.qz, std::max<std::size_t>(1, nonzero_count(cfg.N, cfg.sparsity)),
                                 cfg.qiht_step, cfg.qiht_iters);
            tr.iterations = cfg.qiht_iters;
            break;
    }
    tr.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (solver_used) {
        xhat = res.x_hat;
        tr.iterations = res.iterations;
        tr.converged = res.converged;
        tr.gamma_w_hat = res.theta_hat.gamma_w;
        tr.kappa_hat = res.lambda_hat.kappa;
        tr.lambda_hat = res.lambda_hat;
    }
    const Nmse e = nmse(inst.x, xhat);
    tr.nmse = e.plain;
    tr.nmse_debiased = e.debiased;
    if (full) *full = std::move(res);
    return tr;
}

std::vector<TrialResult> run_cell(const ExperimentConfig& cfg, std::size_t m, double snr_db, Method method) {
    std::vector<TrialResult> out(cfg.trials);
    std::vector<std::exception_ptr> err(cfg.trials);
    const auto nt = static_cast<std::ptrdiff_t>(cfg.trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < nt; ++t) {
        try {
            const Instance inst = make_instance(cfg, m, snr_db, trial_seed(cfg, m, snr_db, static_cast<std::size_t>(t)));
            out[t] = run_method(cfg, inst, method, static_cast<std::size_t>(t), snr_db);
        } catch (...) {
            err[t] = std::current_exception();
        }
    }
    for (const auto& e : err)
        if (e) std::rethrow_exception(e);
    return out;
}

CellSummary summarize(const std::vector<TrialResult>& trials) {
    if (trials.empty()) throw std::invalid_argument("summarize: no trials");
    std::vector<double> a, b, it, rt;
    for (const auto& t : trials) {
        a.push_back(t.nmse);
        b.push_back(t.nmse_debiased);
        it.push_back(t.iterations);
        rt.push_back(t.runtime_seconds);
    }
    const auto [am, as] = mean_std(a);
    const auto [bm, bs] = mean_std(b);
    const auto& f = trials.front();
    return {f.method, f.N, f.M, f.snr_db, trials.size(), am, as, bm, bs, mean_std(it).first, mean_std(rt).first};
}

void write_trials_csv(std::ostream& os, const std::vector<TrialResult>& rows, bool timing) {
    os << kCsvHeader << '\n'
       << "method,N,M,ratio,snr_db,trial,nmse,nmse_db,nmse_debiased,nmse_debiased_db,iterations,converged,"
          "gamma_w_true,gamma_w_hat,kappa_hat"
       << (timing ? ",runtime_seconds" : "") << '\n';
    for (const auto& r : rows) {
        os << to_string(r.method) << ',' << r.N << ',' << r.M << ','
           << csv_num(static_cast<double>(r.M) / static_cast<double>(r.N)) << ',' << csv_num(r.snr_db) << ','
           << r.trial << ',' << csv_num(r.nmse) << ',' << csv_num(to_db(r.nmse)) << ',' << csv_num(r.nmse_debiased)
           << ',' << csv_num(to_db(r.nmse_debiased)) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
           << csv_num(r.gamma_w_true) << ',' << csv_num(r.gamma_w_hat) << ',' << csv_num(r.kappa_hat);
        if (timing) os << ',' << csv_num(r.runtime_seconds);
        os << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<CellSummary>& cells, bool timing) {
    os << kCsvHeader << '\n'
       << "method,N,M,ratio,snr_db,trials,nmse_mean,nmse_std,nmse_mean_db,nmse_debiased_mean,"
          "nmse_debiased_std,nmse_debiased_mean_db,iterations_mean"
       << (timing ? ",runtime_mean_seconds" : "") << '\n';
    for (const auto& c : cells) {
        os << to_string(c.method) << ',' << c.N << ',' << c.M << ','
           << csv_num(static_cast<double>(c.M) / static_cast<double>(c.N)) << ',' << csv_num(c.snr_db) << ','
           << c.trials << ',' << csv_num(c.nmse_mean) << ',' << csv_num(c.nmse_std) << ','
           << csv_num(to_db(c.nmse_mean)) << ',' << csv_num(c.deb_mean) << ',' << csv_num(c.deb_std) << ','
           << csv_num(to_db(c.deb_mean)) << ',' << csv_num(c.iterations_mean);
        if (timing) os << ',' << csv_num(c.runtime_mean);
        os << '\n';
    }
}

nlohmann::json summary_json(const std::vector<CellSummary>& cells) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells) {
        arr.push_back({{"method", to_string(c.method)},
                       {"N", c.N},
                       {"M", c.M},
                       {"snr_db", c.snr_db},
                       {"trials", c.trials},
                       {"nmse_mean", c.nmse_mean},
                       {"nmse_std", c.nmse_std},
                       {"nmse_mean_db", to_db(c.nmse_mean)},
                       {"nmse_debiased_mean", c.deb_mean},
                       {"nmse_debiased_std", c.deb_std},
                       {"iterations_mean", c.iterations_mean},
                       {"runtime_mean_seconds", c.runtime_mean}});
    }
    return nlohmann::json{{"cells", arr}};
}

SignalPrior se_initial_prior(double nu_x, std::size_t components, double kappa) {
    // zero-mean scale mixture, variances halving, total variance nu_x
    SignalPrior p;
    p.kappa = kappa;
    double scale = 0.0;
    for (std::size_t i = 0; i < components; ++i) scale += std::ldexp(1.0, -static_cast<int>(i));
    const double w = 1.0 / static_cast<double>(components);
    const double c = nu_x / (kappa * w * scale);
    for (std::size_t i = 0; i < components; ++i) p.components.push_back({w, 0.0, c * std::ldexp(1.0, -static_cast<int>(i))});
    return p;
}

SeRun run_se_experiment(const ExperimentConfig& cfg, bool estimate_params, bool overlay) {
    cfg.validate();
    if (cfg.dist != NonzeroDist::gaussian) throw std::invalid_argument("se: needs Gaussian nonzeros (a BGM prior)");
    const std::size_t m = cfg.measurement_counts().front();
    const double beta = static_cast<double>(m) / static_cast<double>(cfg.N);
    const double snr = cfg.snr_db.front();
    const SignalPrior truth = SignalPrior::bernoulli_gaussian(cfg.sparsity, 1.0);
    const double nu_x = prior_variance(truth);
    const double gamma_true = nu_x / beta * std::pow(10.0, -snr / 10.0);
    const Quantizer qz = quantizer_for(cfg.bits, std::sqrt(nu_x / beta + gamma_true));
    const SignalPrior start = se_initial_prior(nu_x, cfg.components, cfg.init_kappa);

    SeOptions so;
    so.beta = beta;
    so.mc_samples = cfg.mc_samples;
    so.max_iters = cfg.se_iters;
    so.seed = sub_seed(cfg.seed, 0x5E);
    so.damping = cfg.solver.damping;
    so.inner_pe_iters = cfg.solver.inner_pe_iters;
    so.pe_start_iter = cfg.solver.pe_start_iter;
    so.initial_prior = start;
    so.initial_gamma_w = cfg.init_gamma_w;

    SeRun out;
    out.se = run_state_evolution(truth, qz, gamma_true, so, estimate_params);
    if (!overlay) return out;

    ExperimentConfig ec = cfg;
    ec.matrix = MatrixScale::one_over_m;
    SolverOptions opts = cfg.solver;
    opts.max_iters = cfg.se_iters;
    opts.tol = 1e-300;  // the overlay wants every iteration
    opts.estimate_lambda = estimate_params;
    opts.estimate_theta = estimate_params;

    const std::size_t iters = static_cast<std::size_t>(cfg.se_iters);
    std::vector<std::vector<double>> mse(cfg.trials), deb(cfg.trials);
    // trials run one at a time: each holds an M x N matrix, the kernels are parallel
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        Instance inst = make_instance(ec, m, snr, trial_seed(ec, m, snr, t));
        // quantizer shared with the prediction
        inst.qz = qz;
        inst.y = quantize(inst.v, qz);

        const Nmse start_err = nmse(inst.x, std::vector<double>(cfg.N, 0.0));
        double x2 = 0.0;
        for (double v0 : inst.x) x2 += v0 * v0;
        const double per = x2 / static_cast<double>(cfg.N);
        auto& row = mse[t];
        auto& drow = deb[t];
        row.push_back(per * start_err.plain);
        drow.push_back(per * start_err.debiased);

        SolverOptions run_opts = opts;
        run_opts.on_iteration = [&](const AmpState& st) {
            const Nmse e = nmse(inst.x, st.x_hat);
            row.push_back(per * e.plain);
            drow.push_back(per * e.debiased);
        };
        const SignalPrior p0 = estimate_params ? start : truth;
        const NoisePrior n0{estimate_params ? cfg.init_gamma_w : inst.gamma_w};
        run_amp_pe(inst.A, inst.y, qz, p0, n0, run_opts, inst.x);
        // a converged run keeps its last error
        while (row.size() < iters + 1) {
            row.push_back(row.back());
            drow.push_back(drow.back());
        }
    }

    for (std::size_t k = 0; k <= iters && k < out.se.states.size(); ++k) {
        std::vector<double> col, dcol;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            col.push_back(mse[t][k]);
            dcol.push_back(deb[t][k]);
        }
        const auto [mean, sd] = mean_std(col);
        const auto [dmean, dsd] = mean_std(dcol);
        const SeState& s = out.se.states[k];
        out.overlay.push_back({static_cast<int>(k), s.tau_x_bar, s.mc_stderr, s.err_bar, s.err_debiased_bar, mean, sd,
                               dmean, dsd});
    }
    return out;
}

void write_overlay_csv(std::ostream& os, const std::vector<OverlayRow>& rows) {
    os << kCsvHeader << '\n'
       << "iter,se_mse,mc_stderr,se_err,se_err_debiased,emp_mean,emp_std,emp_debiased_mean,emp_debiased_std\n";
    for (const auto& r : rows)
        os << r.iter << ',' << csv_num(r.se_mse) << ',' << csv_num(r.mc_stderr) << ',' << csv_num(r.se_err) << ','
           << csv_num(r.se_err_debiased) << ',' << csv_num(r.emp_mean) << ',' << csv_num(r.emp_std) << ','
           << csv_num(r.emp_debiased_mean) << ',' << csv_num(r.emp_debiased_std) << '\n';
}

}  // namespace quantamp
