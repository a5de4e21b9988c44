#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dse/detect_metrics.hpp"
#include "dse/filters.hpp"
#include "dse/noise_attacks.hpp"
#include "dse/observer.hpp"
#include "dse/sim.hpp"
#include "json.hpp"

namespace dse {

struct ScenarioSeeds {
    std::uint64_t process = 1;
    std::uint64_t measurement = 2;
    std::uint64_t bw = 3;
    std::uint64_t sampling = 4;
};

struct ObserverSettings {
    LipschitzConstants constants{10.0, 1.0, 1.0};
    bool estimate_constants = false;  // run the sampling estimators instead
    bool relax = true;                // divide mu by 10 until the LMI is feasible
    std::optional<std::filesystem::path> gain_path;
    LmiSolverOptions solver;
};

struct ScenarioConfig {
    std::filesystem::path case_path;
    AttackKind scenario = AttackKind::none;
    std::optional<AttackSpec> attack;  // default_attack() when absent
    NoiseSpec noise;
    std::vector<std::string> estimators{"ekf", "ukf", "srukf", "ckf", "observer"};
    ScenarioSeeds seeds;
    std::filesystem::path output_dir;
    ScenarioSchedule schedule;
    double threshold = 3.0;
    double warmup = 2.0;
    bool scaled_ut = false;
    bool record_covariance = false;
    ObserverSettings observer;

    void validate() const;
};

// Relative paths resolve against base_dir.
ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::filesystem::path& path);
// Applies DSE_SEED to every seed when the variable is set.
void apply_seed_override(ScenarioConfig& cfg);

struct EstimatorRun {
    std::string name;
    bool failed = false;
    std::string failure;
    double failed_at = 0.0;
    std::vector<Vec> means;
    std::vector<Vec> innovations;
    std::vector<Vec> ratios;  // NaN for the observer
    std::vector<Mat> covariances;  // filled when record_covariance is set
    RunMetrics metrics;
};

struct ScenarioResult {
    TruthTrajectory truth;
    MeasurementSeries measured;
    AttackSpec attack;
    Vec q_std;
    std::optional<ObserverGain> gain;
    std::vector<std::string> notes;
    std::vector<EstimatorRun> runs;

    const EstimatorRun& run(const std::string& name) const;
};

RegionOfInterest default_region(const SystemCase& sys);

// Sampled one-sided Lipschitz and inner-boundedness estimates (unless overridden), then LMI
// synthesis. With relax, mu is divided by 10 (then set to 0) until feasible;
// the constants actually used are stored in the gain.
ObserverGain synthesize_gain(const SystemCase& sys, const ObserverSettings& settings, std::uint64_t sampling_seed,
                             std::vector<std::string>* notes = nullptr);

Vec initial_estimate(const SystemCase& sys);

ScenarioResult run_scenario(const ScenarioConfig& cfg, const SystemCase& sys, const ObserverGain* gain = nullptr);

void write_artifacts(const ScenarioResult& res, const ScenarioConfig& cfg, const std::filesystem::path& dir);

struct SummaryRow {
    std::string estimator;
    double final_rel_err;
    double mean_rel_err;
    double detection_rate;
    double false_alarm_rate;
    double wall_time_s;
};

std::vector<SummaryRow> summary_rows(const ScenarioResult& res);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

struct EstimatorLog {
    std::vector<double> t;
    std::vector<Vec> mean, innov, ratio;
};
void write_estimator_log(const std::filesystem::path& path, const std::vector<double>& times, const EstimatorRun& run);
EstimatorLog read_estimator_log(const std::filesystem::path& path);

void write_error_plot_svg(const std::filesystem::path& path, const ScenarioResult& res);

// Merged ranking over several output directories, CSV text.
std::string compare_runs(const std::vector<std::filesystem::path>& dirs);

}  // namespace dse
