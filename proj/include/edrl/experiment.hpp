#pragma once

// Run configuration, metrics persistence and the run/eval/compare entry points.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edrl/ddpg.hpp"
#include "edrl/env.hpp"
#include "edrl/evo.hpp"
#include "edrl/orchestrator.hpp"

namespace edrl::experiment {

enum class Mode { edrl, drl, eval_only };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);  // "edrl", "drl" / "drl-baseline", "eval-only"

struct RunConfig {
    env::CellConfig cell;
    std::vector<env::SliceSpec> slices = env::default_slices();
    evo::EvoConfig evo;
    ddpg::DdpgConfig ddpg;
    orchestrator::EdrlConfig edrl;  // edrl.seed is the master seed
    std::string output_dir = "runs/default";
    Mode mode = Mode::edrl;
    std::string checkpoint;  // eval-only input: actor network or agent checkpoint
    int eval_episodes = 10;
    int cdf_grid = 100;

    void validate() const;
};

/// Parses the JSON document; absent keys keep their defaults, unknown keys
/// and invalid values throw ConfigError naming the key path. Pass
/// validate=false to defer range checks until overrides are applied.
RunConfig parse_config(const std::string& json_text, bool validate = true);
RunConfig load_config(const std::filesystem::path& path, bool validate = true);
std::string dump_config(const RunConfig& cfg);  // canonical, fully resolved JSON
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

struct MetricsRow {
    std::string run_id;
    long index = 0;
    std::string metric;
    double value = 0.0;
    std::string unit;

    bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader = "run_id,index,metric,value,unit";

std::string format_row(const MetricsRow& row);  // value printed with 17 significant digits
MetricsRow parse_row(const std::string& line);

/// Append-only CSV writer; rejects a (run_id, metric) index that goes backwards.
class MetricsWriter {
public:
    explicit MetricsWriter(std::ostream& out);
    void write(const MetricsRow& row);

private:
    std::ostream& out_;
    std::map<std::pair<std::string, std::string>, long> last_index_;
};

std::vector<MetricsRow> read_metrics(std::istream& in);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

/// Empirical CDF at the distinct sorted sample values, thinned to at most
/// `grid_size` points (the last point, probability 1, is always kept).
std::vector<std::pair<double, double>> export_cdf(std::span<const double> samples, int grid_size);

struct Comparison {
    double edrl_final = 0.0;
    double drl_final = 0.0;
    double ratio = 0.0;  // (edrl_final - drl_final) / drl_final
    std::vector<std::pair<long, double>> deltas;  // per hybrid record, edrl - drl at equal env steps
    std::optional<std::string> warning;
};

/// Final-window (last 10% of records) mean of `metric` for both runs.
Comparison compare_runs(std::span<const MetricsRow> edrl_rows, std::span<const MetricsRow> drl_rows,
                        const std::string& metric = "return");

struct Spread {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};
/// Median and quartiles with linear interpolation between order statistics.
Spread summarize(std::vector<double> values);

std::string run_id(const RunConfig& cfg);

/// Executes the configured mode and writes metrics.csv, cdf.csv,
/// resolved_config.json and checkpoints under output_dir. Throws on error.
void run(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace edrl::experiment
