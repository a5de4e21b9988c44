#include "dse/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "dse/case_io.hpp"
#include "dse/errors.hpp"

namespace dse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
const char* const kKnownEstimators[] = {"ekf", "ukf", "srukf", "ckf", "observer"};

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() || p.empty() ? p : base / p; }

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ScenarioConfig::validate() const {
    schedule.validate();
    noise.validate();
    if (estimators.empty()) throw ConfigError("estimator list is empty");
    for (const auto& e : estimators)
        if (std::find(std::begin(kKnownEstimators), std::end(kKnownEstimators), e) == std::end(kKnownEstimators))
            throw ConfigError("unknown estimator '" + e + "'");
    if (!(threshold > 0.0)) throw ConfigError("detection threshold must be positive");
    if (warmup < schedule.wrong_admittance_until) throw ConfigError("warmup must cover the wrong-admittance window");
}

ScenarioConfig config_from_json(const json& j, const fs::path& base_dir) {
    ScenarioConfig cfg;
    try {
        if (!j.contains("schema") || j.at("schema").get<int>() != 1) throw ConfigError("config needs \"schema\": 1");
        cfg.case_path = resolve(base_dir, j.at("case_path").get<std::string>());
        if (!fs::exists(cfg.case_path)) throw ConfigError("case file not found: " + cfg.case_path.string());
        if (j.contains("scenario")) cfg.scenario = attack_kind_from_string(j.at("scenario").get<std::string>());
        if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        read_opt(j, "estimators", cfg.estimators);
        if (j.contains("seeds")) {
            const auto& s = j.at("seeds");
            read_opt(s, "process", cfg.seeds.process);
            read_opt(s, "measurement", cfg.seeds.measurement);
            read_opt(s, "bw", cfg.seeds.bw);
            read_opt(s, "sampling", cfg.seeds.sampling);
        }
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            if (n.contains("kind")) cfg.noise.kind = noise_kind_from_string(n.at("kind").get<std::string>());
            read_opt(n, "std", cfg.noise.std);
            read_opt(n, "m", cfg.noise.m);
            read_opt(n, "s", cfg.noise.s);
            read_opt(n, "a", cfg.noise.a);
            read_opt(n, "b", cfg.noise.b);
        }
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            read_opt(s, "t_end", cfg.schedule.t_end);
            read_opt(s, "sample_rate", cfg.schedule.sample_rate);
            read_opt(s, "steps_per_sample", cfg.schedule.steps_per_sample);
            read_opt(s, "wrong_admittance_until", cfg.schedule.wrong_admittance_until);
            read_opt(s, "process_noise_fraction", cfg.schedule.process_noise_fraction);
        }
        if (j.contains("attack")) {
            const auto& a = j.at("attack");
            AttackSpec spec;
            spec.kind = cfg.scenario;
            read_opt(a, "channels", spec.channels);
            read_opt(a, "factors", spec.factors);
            if (a.contains("window")) {
                const auto w = a.at("window").get<std::vector<double>>();
                if (w.size() != 2) throw ConfigError("attack window must be [t_start, t_end]");
                spec.t_start = w[0];
                spec.t_end = w[1];
            }
            read_opt(a, "replay_shift", spec.replay_shift);
            cfg.attack = spec;
        }
        if (j.contains("detection")) {
            read_opt(j.at("detection"), "threshold", cfg.threshold);
            read_opt(j.at("detection"), "warmup", cfg.warmup);
        }
        if (j.contains("filters")) {
            read_opt(j.at("filters"), "scaled_ut", cfg.scaled_ut);
            read_opt(j.at("filters"), "record_covariance", cfg.record_covariance);
        }
        if (j.contains("observer")) {
            const auto& o = j.at("observer");
            if (o.contains("constants")) {
                const auto& c = o.at("constants");
                if (c.is_string()) {
                    if (c.get<std::string>() != "estimate") throw ConfigError("observer.constants must be an object or \"estimate\"");
                    cfg.observer.estimate_constants = true;
                } else {
                    read_opt(c, "rho", cfg.observer.constants.rho);
                    read_opt(c, "mu", cfg.observer.constants.mu);
                    read_opt(c, "varphi", cfg.observer.constants.varphi);
                }
            }
            read_opt(o, "relax", cfg.observer.relax);
            if (o.contains("gain_path")) cfg.observer.gain_path = resolve(base_dir, o.at("gain_path").get<std::string>());
            if (o.contains("sigma_max")) cfg.observer.solver.sigma_max = o.at("sigma_max").get<double>();
            if (o.contains("sigma_target")) cfg.observer.solver.sigma_target = o.at("sigma_target").get<double>();
            if (o.contains("max_iters")) cfg.observer.solver.max_iters = o.at("max_iters").get<int>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.noise.seed = cfg.seeds.measurement;
    cfg.validate();
    return cfg;
}

json config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema"] = 1;
    j["case_path"] = cfg.case_path.string();
    j["scenario"] = to_string(cfg.scenario);
    if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir.string();
    j["estimators"] = cfg.estimators;
    j["seeds"] = {{"process", cfg.seeds.process},
                  {"measurement", cfg.seeds.measurement},
                  {"bw", cfg.seeds.bw},
                  {"sampling", cfg.seeds.sampling}};
    j["noise"] = {{"kind", to_string(cfg.noise.kind)}, {"std", cfg.noise.std}, {"m", cfg.noise.m},
                  {"s", cfg.noise.s},                  {"a", cfg.noise.a},     {"b", cfg.noise.b}};
    j["schedule"] = {{"t_end", cfg.schedule.t_end},
                     {"sample_rate", cfg.schedule.sample_rate},
                     {"steps_per_sample", cfg.schedule.steps_per_sample},
                     {"wrong_admittance_until", cfg.schedule.wrong_admittance_until},
                     {"process_noise_fraction", cfg.schedule.process_noise_fraction}};
    if (cfg.attack)
        j["attack"] = {{"channels", cfg.attack->channels},
                       {"factors", cfg.attack->factors},
                       {"window", {cfg.attack->t_start, cfg.attack->t_end}},
                       {"replay_shift", cfg.attack->replay_shift}};
    j["detection"] = {{"threshold", cfg.threshold}, {"warmup", cfg.warmup}};
    j["filters"] = {{"scaled_ut", cfg.scaled_ut}, {"record_covariance", cfg.record_covariance}};
    json o;
    if (cfg.observer.estimate_constants)
        o["constants"] = "estimate";
    else
        o["constants"] = {{"rho", cfg.observer.constants.rho},
                          {"mu", cfg.observer.constants.mu},
                          {"varphi", cfg.observer.constants.varphi}};
    o["relax"] = cfg.observer.relax;
    if (cfg.observer.gain_path) o["gain_path"] = cfg.observer.gain_path->string();
    o["sigma_max"] = cfg.observer.solver.sigma_max;
    o["sigma_target"] = cfg.observer.solver.sigma_target;
    o["max_iters"] = cfg.observer.solver.max_iters;
    j["observer"] = o;
    return j;
}

ScenarioConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void apply_seed_override(ScenarioConfig& cfg) {
    const char* env = std::getenv("DSE_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("DSE_SEED is not an unsigned integer: ") + env);
    cfg.seeds = {v, v, v, v};
    cfg.noise.seed = v;
}

const EstimatorRun& ScenarioResult::run(const std::string& name) const {
    for (const auto& r : runs)
        if (r.name == name) return r;
    throw ContractViolation("no run for estimator '" + name + "'");
}

RegionOfInterest default_region(const SystemCase& sys) {
    RegionOfInterest d;
    d.lower = sys.x0;
    d.upper = sys.x0;
    for (int i = 0; i < sys.m(); ++i) {
        const double half[4] = {0.5, 2.0, 0.2, 0.2};
        for (int c = 0; c < 4; ++c) {
            d.lower[4 * i + c] -= half[c];
            d.upper[4 * i + c] += half[c];
        }
    }
    d.n_samples = 1000;
    return d;
}

ObserverGain synthesize_gain(const SystemCase& sys, const ObserverSettings& settings, std::uint64_t sampling_seed,
                             std::vector<std::string>* notes) {
    const LinearSplit split = split_linear(sys);
    const Mat C = synthesis_output_matrix(sys);
    LipschitzConstants c = settings.constants;
    if (settings.estimate_constants) {
        const auto d = default_region(sys);
        const VecFn phi = [&](const Vec& x) { return split.phi(x, sys.y_post); };
        c.rho = estimate_rho(phi, d, sampling_seed).rho;
        const auto mp = estimate_mu_phi(phi, d, sampling_seed, 4 * d.n_samples);
        c.mu = mp.mu;
        c.varphi = mp.varphi;
        if (notes) notes->push_back(fmt::format("estimated constants rho={} mu={} varphi={}", c.rho, c.mu, c.varphi));
    }
    const int max_relax = settings.relax ? 4 : 0;
    for (int attempt = 0;; ++attempt) {
        try {
            ObserverGain g = solve_observer_lmi(split.A, C, c, settings.solver);
            verify_gain(g, split.A, C);
            return g;
        } catch (const InfeasibleError& e) {
            if (notes) notes->push_back(e.what());
            if (attempt >= max_relax) throw;
            c.mu = attempt + 1 < max_relax ? c.mu / 10.0 : 0.0;
        }
    }
}

Vec initial_estimate(const SystemCase& sys) {
    Vec x = 2.0 * sys.x0;
    for (int i = 0; i < sys.m(); ++i) x[idx::omega(i)] = sys.omega_s;
    return x;
}

namespace {

bool estimate_valid(const SystemCase& sys, const Vec& x) {
    if (!x.allFinite()) return false;
    for (int i = 0; i < sys.m(); ++i) {
        const double w = x[idx::omega(i)];
        if (w < 0.5 * sys.omega_s || w > 1.5 * sys.omega_s) return false;
    }
    return true;
}

const CMat& estimator_admittance(const SystemCase& sys, const ScenarioSchedule& sched, int k) {
    return sched.estimator_uses_pre(k) ? sys.y_pre : sys.y_post;
}

struct Recorder {
    EstimatorRun& run;
    int total;
    void push(const Vec& mean, const Vec& innov, const Vec& ratio) {
        run.means.push_back(mean);
        run.innovations.push_back(innov);
        run.ratios.push_back(ratio);
    }
    void fail(int k, double t, const std::string& why) {
        run.failed = true;
        run.failed_at = t;
        run.failure = why;
        const Eigen::Index n = run.means.empty() ? 0 : run.means.front().size();
        const Eigen::Index p = run.innovations.empty() ? 0 : run.innovations.front().size();
        for (int j = k; j < total; ++j) push(Vec::Constant(n, kNaN), Vec::Constant(p, kNaN), Vec::Constant(p, kNaN));
    }
};

Vec ratios_of(const Vec& innov, const Vec& pyy) {
    Vec r(innov.size());
    for (Eigen::Index j = 0; j < innov.size(); ++j) r[j] = pyy[j] > 0.0 ? innov[j] / std::sqrt(pyy[j]) : kNaN;
    return r;
}

void run_filter(const std::string& name, const SystemCase& sys, const ScenarioConfig& cfg, const Vec& q_std,
                const MeasurementSeries& ys, EstimatorRun& run) {
    const auto& sched = cfg.schedule;
    const int ns = static_cast<int>(ys.values.size());
    const DiscreteModel model = make_estimator_model(sys, sched);
    FilterConfig fc;
    fc.Q = q_std.array().square().matrix().asDiagonal();
    fc.R = Mat::Identity(sys.p(), sys.p()) * (0.01 * 0.01);
    fc.scaled_ut = cfg.scaled_ut;

    GaussianBelief b{initial_estimate(sys), 0.1 * Mat::Identity(sys.n(), sys.n())};
    SqrtBelief sb{b.mean, covariance_sqrt(b.cov, fc.eig_floor)};
    Recorder rec{run, ns};
    {
        const Vec ym = model.measure(b.mean, 0);
        const Mat H = model.measure_jacobian(b.mean, 0);
        const Vec innov = ys.values[0] - ym;
        rec.push(b.mean, innov, ratios_of(innov, (H * b.cov * H.transpose() + fc.R).diagonal()));
        if (cfg.record_covariance) run.covariances.push_back(b.cov);
    }
    for (int k = 1; k < ns; ++k) {
        try {
            StepResult r;
            if (name == "ekf") {
                r = ekf_step(b, ys.values[k], k, model, fc);
            } else if (name == "ukf") {
                r = ukf_step(b, ys.values[k], k, model, fc);
            } else if (name == "ckf") {
                r = ckf_step(b, ys.values[k], k, model, fc);
            } else {
                const auto s = srukf_step(sb, ys.values[k], k, model, fc);
                sb = s.belief;
                r.belief = {s.belief.mean, s.belief.sqrt_factor * s.belief.sqrt_factor.transpose()};
                r.innovation = s.innovation;
                r.pyy_diag = s.pyy_diag;
            }
            b = r.belief;
            if (!estimate_valid(sys, b.mean)) throw DivergenceError("estimate left the valid region", ys.times[k]);
            rec.push(b.mean, r.innovation, ratios_of(r.innovation, r.pyy_diag));
            if (cfg.record_covariance) run.covariances.push_back(b.cov);
        } catch (const std::runtime_error& e) {
            rec.fail(k, ys.times[k], e.what());
            return;
        }
    }
}

void run_observer(const SystemCase& sys, const ScenarioConfig& cfg, const ObserverGain& gain,
                  const MeasurementSeries& ys, EstimatorRun& run) {
    const auto& sched = cfg.schedule;
    const int ns = static_cast<int>(ys.values.size());
    const LinearSplit split = split_linear(sys);
    Vec x = initial_estimate(sys);
    Recorder rec{run, ns};
    const Vec no_ratio = Vec::Constant(sys.p(), kNaN);
    rec.push(x, observer_innovation(sys, ys.values[0], x, estimator_admittance(sys, sched, 0)), no_ratio);
    for (int k = 1; k < ns; ++k) {
        try {
            x = observer_step(sys, split, x, sys.u0, ys.values[k - 1], gain.L, estimator_admittance(sys, sched, k - 1),
                              sched.sample_dt(), sched.steps_per_sample);
            if (!estimate_valid(sys, x)) throw DivergenceError("estimate left the valid region", ys.times[k]);
            rec.push(x, observer_innovation(sys, ys.values[k], x, estimator_admittance(sys, sched, k)), no_ratio);
        } catch (const std::runtime_error& e) {
            rec.fail(k, ys.times[k], e.what());
            return;
        }
    }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg, const SystemCase& sys, const ObserverGain* gain) {
    cfg.validate();
    const auto& sched = cfg.schedule;
    ScenarioResult res;
    const TruthSetup setup = prepare_truth(sys, sched, cfg.seeds.bw);
    res.q_std = setup.q_std;
    res.truth = simulate_truth(sys, sched, setup.unknown_input, setup.q_std, cfg.seeds.process);

    const MeasurementSeries clean{res.truth.times, res.truth.clean_measurements};
    res.attack = cfg.attack ? *cfg.attack : default_attack(cfg.scenario, sys.m(), sched.t_end);
    res.attack.kind = cfg.scenario;
    NoiseSpec noise = cfg.noise;
    noise.seed = cfg.seeds.measurement;
    res.measured = add_noise(apply_attack(clean, res.attack), noise);

    const bool has_window = res.attack.kind != AttackKind::none;
    const std::vector<int> attacked = has_window ? res.attack.channels : std::vector<int>{};
    for (const auto& name : cfg.estimators) {
        EstimatorRun run;
        run.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        if (name == "observer") {
            if (!res.gain) {
                try {
                    if (gain) {
                        res.gain = *gain;
                    } else if (cfg.observer.gain_path && fs::exists(*cfg.observer.gain_path)) {
                        res.gain = load_gain(*cfg.observer.gain_path);
                        verify_gain(*res.gain, split_linear(sys).A, synthesis_output_matrix(sys));
                        res.notes.push_back("loaded gain " + cfg.observer.gain_path->string());
                    } else {
                        res.gain = synthesize_gain(sys, cfg.observer, cfg.seeds.sampling, &res.notes);
                    }
                } catch (const std::runtime_error& e) {
                    run.failed = true;
                    run.failure = e.what();
                }
            }
            if (res.gain) run_observer(sys, cfg, *res.gain, res.measured, run);
        } else {
            run_filter(name, sys, cfg, setup.q_std, res.measured, run);
        }
        run.metrics.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        auto& m = run.metrics;
        const int ns = static_cast<int>(res.truth.times.size());
        m.rel_err.assign(ns, kInf);
        for (int k = 0; k < ns && k < static_cast<int>(run.means.size()); ++k)
            if (run.means[k].allFinite()) m.rel_err[k] = rel_error_norm(res.truth.states[k], run.means[k]).value;
        m.final_err = m.rel_err.back();
        m.mean_err = window_mean(res.truth.times, m.rel_err, 0.0, sched.t_end);
        if (name == "observer" || run.ratios.empty()) {
            m.detection_rate = m.false_alarm_rate = kNaN;
        } else {
            const auto det = flag_compromised(res.truth.times, run.ratios, cfg.threshold, cfg.warmup, attacked,
                                              has_window ? res.attack.t_start : -1e300,
                                              has_window ? res.attack.t_end : 1e300);
            m.detection_rate = attacked.empty() ? kNaN : det.detection_rate;
            m.false_alarm_rate = det.false_alarm_rate;
        }
        res.runs.push_back(std::move(run));
    }
    return res;
}

std::vector<SummaryRow> summary_rows(const ScenarioResult& res) {
    std::vector<SummaryRow> rows;
    for (const auto& r : res.runs)
        rows.push_back({r.name, r.metrics.final_err, r.metrics.mean_err, r.metrics.detection_rate,
                        r.metrics.false_alarm_rate, r.metrics.wall_time});
    return rows;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{}", v);
}

double parse_num(const std::string& s) {
    if (s == "nan") return kNaN;
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("malformed number '" + s + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

}  // namespace

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
    auto out = open_out(path);
    out << "estimator,final_rel_err,mean_rel_err,detection_rate,false_alarm_rate,wall_time_s\n";
    for (const auto& r : rows)
        out << r.estimator << ',' << num(r.final_rel_err) << ',' << num(r.mean_rel_err) << ','
            << num(r.detection_rate) << ',' << num(r.false_alarm_rate) << ',' << num(r.wall_time_s) << '\n';
}

std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "estimator,final_rel_err,mean_rel_err,detection_rate,false_alarm_rate,wall_time_s")
        throw ConfigError(path.string() + ": unexpected summary header");
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 6) throw ConfigError(path.string() + ": summary row needs 6 fields");
        rows.push_back({c[0], parse_num(c[1]), parse_num(c[2]), parse_num(c[3]), parse_num(c[4]), parse_num(c[5])});
    }
    return rows;
}

void write_estimator_log(const fs::path& path, const std::vector<double>& times, const EstimatorRun& run) {
    auto out = open_out(path);
    const Eigen::Index n = run.means.front().size(), p = run.innovations.front().size();
    out << 't';
    for (Eigen::Index i = 1; i <= n; ++i) out << ",mean_" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",innov_" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",ratio_" << i;
    out << '\n';
    for (std::size_t k = 0; k < times.size(); ++k) {
        out << num(times[k]);
        for (const Vec* v : {&run.means[k], &run.innovations[k], &run.ratios[k]})
            for (Eigen::Index i = 0; i < v->size(); ++i) out << ',' << num((*v)[i]);
        out << '\n';
    }
}

EstimatorLog read_estimator_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    const auto head = split_csv(line);
    const auto count = [&](const std::string& prefix) {
        return std::count_if(head.begin(), head.end(), [&](const std::string& h) { return h.rfind(prefix, 0) == 0; });
    };
    const Eigen::Index n = count("mean_"), p = count("innov_");
    EstimatorLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (static_cast<Eigen::Index>(c.size()) != 1 + n + 2 * p) throw ConfigError(path.string() + ": ragged row");
        log.t.push_back(parse_num(c[0]));
        Vec mean(n), innov(p), ratio(p);
        for (Eigen::Index i = 0; i < n; ++i) mean[i] = parse_num(c[1 + i]);
        for (Eigen::Index i = 0; i < p; ++i) innov[i] = parse_num(c[1 + n + i]);
        for (Eigen::Index i = 0; i < p; ++i) ratio[i] = parse_num(c[1 + n + p + i]);
        log.mean.push_back(mean);
        log.innov.push_back(innov);
        log.ratio.push_back(ratio);
    }
    return log;
}

void write_error_plot_svg(const fs::path& path, const ScenarioResult& res) {
    const double w = 820, h = 480, left = 70, right = 150, top = 30, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    const double t_end = res.truth.times.back();
    const double lo = -4.0, hi = 1.0;  // log10 range
    auto xpix = [&](double t) { return left + pw * t / t_end; };
    auto ypix = [&](double v) {
        const double l = std::clamp(std::log10(std::max(v, 1e-300)), lo, hi);
        return top + ph * (hi - l) / (hi - lo);
    };
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

    auto out = open_out(path);
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                       "font-size=\"12\">\n",
                       w, h);
    out << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", left,
                       top, pw, ph);
    for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
        const double y = ypix(std::pow(10.0, e));
        out << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", left, y, left + pw, y);
        out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{}</text>\n", left - 6, y + 4, e);
    }
    for (int s = 0; s <= static_cast<int>(t_end); ++s)
        out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", xpix(s), top + ph + 18, s);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t (s)</text>\n", left + pw / 2, h - 8);
    out << fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">"
                       "relative error norm</text>\n",
                       top + ph / 2, top + ph / 2);
    for (std::size_t r = 0; r < res.runs.size(); ++r) {
        const auto& run = res.runs[r];
        const char* color = colors[r % std::size(colors)];
        std::string pts;
        for (std::size_t k = 0; k < run.metrics.rel_err.size(); ++k) {
            const double v = run.metrics.rel_err[k];
            if (!std::isfinite(v)) break;
            pts += fmt::format("{:.2f},{:.2f} ", xpix(res.truth.times[k]), ypix(v));
        }
        out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
        const double ly = top + 16 + 18 * static_cast<double>(r);
        out << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                           left + pw + 12, ly, left + pw + 36, ly, color);
        out << fmt::format("<text x=\"{}\" y=\"{}\">{}{}</text>\n", left + pw + 42, ly + 4, run.name,
                           run.failed ? " (failed)" : "");
    }
    out << "</svg>\n";
}

void write_artifacts(const ScenarioResult& res, const ScenarioConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    write_trajectory_csv(dir / "truth.csv", res.truth);
    for (const auto& run : res.runs)
        if (!run.means.empty()) write_estimator_log(dir / (run.name + "_log.csv"), res.truth.times, run);
    write_summary_csv(dir / "summary.csv", summary_rows(res));
    write_error_plot_svg(dir / "rel_err.svg", res);
    if (res.gain) save_gain(*res.gain, dir / "observer_gain.json");
    auto out = open_out(dir / "run.json");
    json meta;
    meta["config"] = config_to_json(cfg);
    meta["notes"] = res.notes;
    json fails = json::object();
    for (const auto& run : res.runs)
        if (run.failed) fails[run.name] = {{"at", run.failed_at}, {"reason", run.failure}};
    meta["failures"] = fails;
    out << meta.dump(2) << '\n';
}

std::string compare_runs(const std::vector<fs::path>& dirs) {
    std::string out = "run,rank,estimator,final_rel_err,mean_rel_err,detection_rate,false_alarm_rate,wall_time_s\n";
    for (const auto& d : dirs) {
        auto rows = read_summary_csv(d / "summary.csv");
        std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
            const double fa = std::isnan(a.final_rel_err) ? kInf : a.final_rel_err;
            const double fb = std::isnan(b.final_rel_err) ? kInf : b.final_rel_err;
            return fa < fb;
        });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            out += fmt::format("{},{},{},{},{},{},{},{}\n", d.filename().empty() ? d.parent_path().filename().string()
                                                                                  : d.filename().string(),
                               i + 1, r.estimator, num(r.final_rel_err), num(r.mean_rel_err), num(r.detection_rate),
                               num(r.false_alarm_rate), num(r.wall_time_s));
        }
    }
    return out;
}

}  // namespace dse
