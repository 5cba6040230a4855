#include "edrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "edrl/mdp.hpp"
#include "edrl/nn.hpp"

namespace edrl::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::edrl: return "edrl";
        case Mode::drl: return "drl";
        case Mode::eval_only: return "eval-only";
    }
    throw ConfigError("unknown mode", "mode");
}

Mode parse_mode(const std::string& name) {
    if (name == "edrl") return Mode::edrl;
    if (name == "drl" || name == "drl-baseline") return Mode::drl;
    if (name == "eval-only" || name == "eval") return Mode::eval_only;
    throw ConfigError("unknown mode '" + name + "' (expected edrl, drl or eval-only)", "mode");
}

namespace {

// Re-keys a section's ConfigError with its full path, e.g. "cell.num_rbs".
template <class F>
void scoped(const std::string& prefix, F&& check) {
    try {
        check();
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        const std::string key = e.key();
        if (!key.empty() && msg.rfind(key + ": ", 0) == 0) msg = msg.substr(key.size() + 2);
        throw ConfigError(msg, key.empty() ? prefix : prefix + "." + key);
    }
}

// A JSON object whose keys must all be consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    const json* find(const std::string& k) {
        auto it = j_.find(k);
        if (it == j_.end()) return nullptr;
        seen_.insert(k);
        return &*it;
    }

    void get(const std::string& k, int& out) {
        if (auto* v = find(k)) out = as_int(*v, key(k));
    }
    void get(const std::string& k, std::uint64_t& out) {
        if (auto* v = find(k)) out = as_u64(*v, key(k));
    }
    void get(const std::string& k, double& out) {
        if (auto* v = find(k)) {
            if (!v->is_number()) throw ConfigError("expected a number", key(k));
            out = v->get<double>();
        }
    }
    void get(const std::string& k, bool& out) {
        if (auto* v = find(k)) {
            if (!v->is_boolean()) throw ConfigError("expected true or false", key(k));
            out = v->get<bool>();
        }
    }
    void get(const std::string& k, std::string& out) {
        if (auto* v = find(k)) {
            if (!v->is_string()) throw ConfigError("expected a string", key(k));
            out = v->get<std::string>();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key", key(it.key()));
    }

    static int as_int(const json& v, const std::string& key) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer", key);
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            throw ConfigError("integer out of range", key);
        return static_cast<int>(x);
    }
    static std::uint64_t as_u64(const json& v, const std::string& key) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) throw ConfigError("must be >= 0", key);
        throw ConfigError("expected a non-negative integer", key);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_adam(Section& parent, const std::string& name, nn::AdamConfig& adam) {
    if (const json* v = parent.find(name)) {
        Section s(*v, parent.key(name));
        s.get("lr", adam.lr);
        s.get("beta1", adam.beta1);
        s.get("beta2", adam.beta2);
        s.get("eps", adam.eps);
        s.finish();
    }
}

void parse_cell(const json& j, env::CellConfig& c) {
    Section s(j, "cell");
    s.get("num_rbs", c.num_rbs);
    s.get("rb_bandwidth_hz", c.rb_bandwidth_hz);
    s.get("subcarrier_spacing_hz", c.subcarrier_spacing_hz);
    s.get("tx_power_dbm", c.tx_power_dbm);
    s.get("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
    s.get("pathloss_exp", c.pathloss_exp);
    s.get("num_taps", c.num_taps);
    s.get("cell_radius_m", c.cell_radius_m);
    s.get("min_distance_m", c.min_distance_m);
    s.get("mtc_min_rate_bps", c.mtc_min_rate_bps);
    s.get("urllc_delay_cap_s", c.urllc_delay_cap_s);
    if (const json* v = s.find("interferers")) {
        if (!v->is_array()) throw ConfigError("expected an array", "cell.interferers");
        c.interferers.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            Section is((*v)[i], "cell.interferers[" + std::to_string(i) + "]");
            env::Interferer intf;
            is.get("distance_m", intf.distance_m);
            is.get("tx_power_dbm", intf.tx_power_dbm);
            is.finish();
            c.interferers.push_back(intf);
        }
    }
    s.finish();
}

void parse_slices(const json& j, std::vector<env::SliceSpec>& slices) {
    if (!j.is_array()) throw ConfigError("expected an array", "slices");
    slices.clear();
    for (std::size_t l = 0; l < j.size(); ++l) {
        Section s(j[l], "slices[" + std::to_string(l) + "]");
        env::SliceSpec slice;
        slice.id = static_cast<int>(l);
        if (const json* k = s.find("kind")) {
            if (!k->is_string()) throw ConfigError("expected a string", s.key("kind"));
            scoped("slices[" + std::to_string(l) + "]", [&] { slice.kind = env::parse_slice_kind(k->get<std::string>()); });
        } else {
            throw ConfigError("missing", s.key("kind"));
        }
        s.get("num_ues", slice.num_ues);
        s.get("qos_threshold", slice.qos_threshold);
        s.get("qos_margin", slice.qos_margin);
        s.get("urllc_mean_packet_bits", slice.urllc_mean_packet_bits);
        s.finish();
        slices.push_back(slice);
    }
}

void parse_evo(const json& j, evo::EvoConfig& e) {
    Section s(j, "evo");
    s.get("population_size", e.population_size);
    s.get("elite_fraction", e.elite_fraction);
    s.get("mutation_prob", e.mutation_prob);
    s.get("super_mut_prob", e.super_mut_prob);
    s.get("reset_prob", e.reset_prob);
    s.get("mutation_strength", e.mutation_strength);
    s.get("crossover_batch", e.crossover_batch);
    s.get("mutation_batch", e.mutation_batch);
    s.get("tournament_size", e.tournament_size);
    s.get("noise_is_variance", e.noise_is_variance);
    s.finish();
}

void parse_ddpg(const json& j, ddpg::DdpgConfig& d) {
    Section s(j, "ddpg");
    if (const json* v = s.find("hidden")) {
        if (!v->is_array()) throw ConfigError("expected an array of integers", "ddpg.hidden");
        d.hidden.clear();
        for (const auto& h : *v) d.hidden.push_back(Section::as_int(h, "ddpg.hidden"));
    }
    s.get("gamma", d.gamma);
    s.get("tau", d.tau);
    s.get("explore_sigma", d.explore_sigma);
    s.get("batch_size", d.batch_size);
    s.get("buffer_capacity", d.buffer_capacity);
    parse_adam(s, "actor_adam", d.actor_adam);
    parse_adam(s, "critic_adam", d.critic_adam);
    s.finish();
}

void parse_training(const json& j, orchestrator::EdrlConfig& t) {
    Section s(j, "training");
    s.get("generations", t.generations);
    s.get("sync_period", t.sync_period);
    s.get("episode_length", t.episode_length);
    s.get("ttis_per_step", t.ttis_per_step);
    if (const json* v = s.find("grad_steps_per_generation")) {
        if (v->is_null())
            t.grad_steps_per_generation.reset();
        else
            t.grad_steps_per_generation = Section::as_int(*v, "training.grad_steps_per_generation");
    }
    s.get("ea_to_rl", t.ea_to_rl);
    s.get("ea_to_rl_patience", t.ea_to_rl_patience);
    s.get("convergence_check", t.convergence_check);
    s.get("convergence_window", t.convergence_window);
    s.get("convergence_tol", t.convergence_tol);
    s.finish();
}

ojson adam_json(const nn::AdamConfig& a) {
    ojson o;
    o["lr"] = a.lr;
    o["beta1"] = a.beta1;
    o["beta2"] = a.beta2;
    o["eps"] = a.eps;
    return o;
}

ojson to_json(const RunConfig& cfg) {
    ojson o;
    o["mode"] = to_string(cfg.mode);
    o["seed"] = cfg.edrl.seed;
    o["output_dir"] = cfg.output_dir;
    o["checkpoint"] = cfg.checkpoint;
    o["eval_episodes"] = cfg.eval_episodes;
    o["cdf_grid"] = cfg.cdf_grid;

    const auto& c = cfg.cell;
    ojson cell;
    cell["num_rbs"] = c.num_rbs;
    cell["rb_bandwidth_hz"] = c.rb_bandwidth_hz;
    cell["subcarrier_spacing_hz"] = c.subcarrier_spacing_hz;
    cell["tx_power_dbm"] = c.tx_power_dbm;
    cell["noise_psd_dbm_hz"] = c.noise_psd_dbm_hz;
    cell["pathloss_exp"] = c.pathloss_exp;
    cell["num_taps"] = c.num_taps;
    cell["interferers"] = ojson::array();
    for (const auto& i : c.interferers) {
        ojson oi;
        oi["distance_m"] = i.distance_m;
        oi["tx_power_dbm"] = i.tx_power_dbm;
        cell["interferers"].push_back(oi);
    }
    cell["cell_radius_m"] = c.cell_radius_m;
    cell["min_distance_m"] = c.min_distance_m;
    cell["mtc_min_rate_bps"] = c.mtc_min_rate_bps;
    cell["urllc_delay_cap_s"] = c.urllc_delay_cap_s;
    o["cell"] = cell;

    o["slices"] = ojson::array();
    for (const auto& s : cfg.slices) {
        ojson os;
        os["kind"] = std::string(env::to_string(s.kind));
        os["num_ues"] = s.num_ues;
        os["qos_threshold"] = s.qos_threshold;
        os["qos_margin"] = s.qos_margin;
        os["urllc_mean_packet_bits"] = s.urllc_mean_packet_bits;
        o["slices"].push_back(os);
    }

    const auto& e = cfg.evo;
    ojson evo;
    evo["population_size"] = e.population_size;
    evo["elite_fraction"] = e.elite_fraction;
    evo["mutation_prob"] = e.mutation_prob;
    evo["super_mut_prob"] = e.super_mut_prob;
    evo["reset_prob"] = e.reset_prob;
    evo["mutation_strength"] = e.mutation_strength;
    evo["crossover_batch"] = e.crossover_batch;
    evo["mutation_batch"] = e.mutation_batch;
    evo["tournament_size"] = e.tournament_size;
    evo["noise_is_variance"] = e.noise_is_variance;
    o["evo"] = evo;

    const auto& d = cfg.ddpg;
    ojson dd;
    dd["hidden"] = d.hidden;
    dd["gamma"] = d.gamma;
    dd["tau"] = d.tau;
    dd["explore_sigma"] = d.explore_sigma;
    dd["batch_size"] = d.batch_size;
    dd["buffer_capacity"] = d.buffer_capacity;
    dd["actor_adam"] = adam_json(d.actor_adam);
    dd["critic_adam"] = adam_json(d.critic_adam);
    o["ddpg"] = dd;

    const auto& t = cfg.edrl;
    ojson tr;
    tr["generations"] = t.generations;
    tr["sync_period"] = t.sync_period;
    tr["episode_length"] = t.episode_length;
    tr["ttis_per_step"] = t.ttis_per_step;
    tr["grad_steps_per_generation"] =
        t.grad_steps_per_generation ? ojson(*t.grad_steps_per_generation) : ojson(nullptr);
    tr["ea_to_rl"] = t.ea_to_rl;
    tr["ea_to_rl_patience"] = t.ea_to_rl_patience;
    tr["convergence_check"] = t.convergence_check;
    tr["convergence_window"] = t.convergence_window;
    tr["convergence_tol"] = t.convergence_tol;
    o["training"] = tr;
    return o;
}

}  // namespace

void RunConfig::validate() const {
    scoped("cell", [&] { cell.validate(); });
    scoped("slices", [&] { env::validate_slices(slices); });
    scoped("evo", [&] { evo.validate(); });
    scoped("ddpg", [&] { ddpg.validate(); });
    scoped("training", [&] { edrl.validate(); });
    if (output_dir.empty()) throw ConfigError("must not be empty", "output_dir");
    if (eval_episodes < 1) throw ConfigError("must be >= 1", "eval_episodes");
    if (cdf_grid < 1) throw ConfigError("must be >= 1", "cdf_grid");
    if (mode == Mode::eval_only && checkpoint.empty())
        throw ConfigError("eval-only mode needs a checkpoint", "checkpoint");
}

RunConfig parse_config(const std::string& json_text, bool validate) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what(), "<root>");
    }
    RunConfig cfg;
    Section root(j, "");
    if (const json* v = root.find("mode")) {
        if (!v->is_string()) throw ConfigError("expected a string", "mode");
        cfg.mode = parse_mode(v->get<std::string>());
    }
    root.get("seed", cfg.edrl.seed);
    root.get("output_dir", cfg.output_dir);
    root.get("checkpoint", cfg.checkpoint);
    root.get("eval_episodes", cfg.eval_episodes);
    root.get("cdf_grid", cfg.cdf_grid);
    if (const json* v = root.find("cell")) parse_cell(*v, cfg.cell);
    if (const json* v = root.find("slices")) parse_slices(*v, cfg.slices);
    if (const json* v = root.find("evo")) parse_evo(*v, cfg.evo);
    if (const json* v = root.find("ddpg")) parse_ddpg(*v, cfg.ddpg);
    if (const json* v = root.find("training")) parse_training(*v, cfg.edrl);
    root.finish();
    if (validate) cfg.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path, bool validate) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string(), "<file>");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), validate);
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void save_config(const RunConfig& cfg, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << dump_config(cfg);
}

// ---- metrics ------------------------------------------------------------

std::string format_row(const MetricsRow& row) {
    char value[40];
    std::snprintf(value, sizeof value, "%.17g", row.value);
    return row.run_id + "," + std::to_string(row.index) + "," + row.metric + "," + value + "," + row.unit;
}

MetricsRow parse_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) throw std::runtime_error("malformed metrics row: " + line);
    MetricsRow row;
    row.run_id = fields[0];
    row.metric = fields[2];
    row.unit = fields[4];
    try {
        row.index = std::stol(fields[1]);
        row.value = std::stod(fields[3]);
    } catch (const std::exception&) {
        throw std::runtime_error("malformed metrics row: " + line);
    }
    return row;
}

MetricsWriter::MetricsWriter(std::ostream& out) : out_(out) { out_ << kMetricsHeader << '\n'; }

void MetricsWriter::write(const MetricsRow& row) {
    for (const auto* s : {&row.run_id, &row.metric, &row.unit})
        if (s->find_first_of(",\n") != std::string::npos)
            throw ContractViolation("metrics fields must not contain ',' or newlines");
    const auto key = std::make_pair(row.run_id, row.metric);
    auto it = last_index_.find(key);
    if (it != last_index_.end() && row.index < it->second)
        throw ContractViolation("metrics index went backwards for " + row.metric);
    last_index_[key] = row.index;
    out_ << format_row(row) << '\n';
}

std::vector<MetricsRow> read_metrics(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("missing metrics header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_row(line));
    return rows;
}

std::vector<MetricsRow> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_metrics(in);
}

// ---- analysis -----------------------------------------------------------

std::vector<std::pair<double, double>> export_cdf(std::span<const double> samples, int grid_size) {
    if (samples.empty()) throw std::invalid_argument("export_cdf: no samples");
    if (grid_size < 1) throw std::invalid_argument("export_cdf: grid size must be >= 1");
    std::vector<double> v(samples.begin(), samples.end());
    for (double x : v)
        if (std::isnan(x)) throw std::invalid_argument("export_cdf: NaN sample");
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    std::vector<std::pair<double, double>> steps;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i + 1 == v.size() || v[i + 1] != v[i]) steps.emplace_back(v[i], static_cast<double>(i + 1) / n);
    if (steps.size() <= static_cast<std::size_t>(grid_size)) return steps;

    std::vector<std::pair<double, double>> thinned;
    const std::size_t m = steps.size();
    const auto g = static_cast<std::size_t>(grid_size);
    for (std::size_t j = 1; j <= g; ++j) thinned.push_back(steps[(j * m) / g - 1]);
    return thinned;
}

namespace {

std::vector<std::pair<long, double>> series(std::span<const MetricsRow> rows, const std::string& metric) {
    std::vector<std::pair<long, double>> out;
    for (const auto& r : rows)
        if (r.metric == metric) out.emplace_back(r.index, r.value);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

double final_window_mean(const std::vector<std::pair<long, double>>& s) {
    const std::size_t w = std::max<std::size_t>(1, (s.size() + 9) / 10);
    double sum = 0.0;
    for (std::size_t i = s.size() - w; i < s.size(); ++i) sum += s[i].second;
    return sum / static_cast<double>(w);
}

}  // namespace

Comparison compare_runs(std::span<const MetricsRow> edrl_rows, std::span<const MetricsRow> drl_rows,
                        const std::string& metric) {
    const auto e = series(edrl_rows, metric);
    const auto d = series(drl_rows, metric);
    if (e.empty() || d.empty()) throw std::runtime_error("compare: metric '" + metric + "' missing from a run");

    Comparison c;
    c.edrl_final = final_window_mean(e);
    c.drl_final = final_window_mean(d);
    c.ratio = (c.edrl_final - c.drl_final) / c.drl_final;

    const auto e_steps = series(edrl_rows, "env_steps");
    const auto d_steps = series(drl_rows, "env_steps");
    if (e_steps.empty() || d_steps.empty()) {
        c.warning = "env_steps missing; sample budgets cannot be checked";
        return c;
    }
    if (e_steps.back().second != d_steps.back().second) {
        std::ostringstream w;
        w << "environment step budgets differ: " << e_steps.back().second << " vs " << d_steps.back().second;
        c.warning = w.str();
    }

    std::map<long, double> d_value(d.begin(), d.end());
    std::map<double, long> d_index_at_steps;
    for (const auto& [idx, steps] : d_steps) d_index_at_steps.emplace(steps, idx);
    std::map<long, double> e_value(e.begin(), e.end());
    for (const auto& [idx, steps] : e_steps) {
        auto at = d_index_at_steps.find(steps);
        auto ev = e_value.find(idx);
        if (at == d_index_at_steps.end() || ev == e_value.end()) continue;
        auto dv = d_value.find(at->second);
        if (dv != d_value.end()) c.deltas.emplace_back(idx, ev->second - dv->second);
    }
    return c;
}

Spread summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: no values");
    std::sort(values.begin(), values.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {q(0.5), q(0.25), q(0.75)};
}

std::string run_id(const RunConfig& cfg) { return to_string(cfg.mode) + "-seed" + std::to_string(cfg.edrl.seed); }

// ---- run ----------------------------------------------------------------

namespace {

struct Recorder {
    MetricsWriter& writer;
    std::string id;
    const std::vector<env::SliceSpec>& slices;
    std::vector<std::vector<double>> qos_samples;         // per slice
    std::vector<std::vector<double>> throughput_samples;  // per slice, pooled over UEs
    std::vector<int> ue_slice;

    void put(long index, const std::string& metric, double value, const std::string& unit) {
        writer.write({id, index, metric, value, unit});
    }

    void qos(long index, const std::vector<double>& slice_qos, const std::vector<double>& ue_throughput) {
        for (std::size_t l = 0; l < slice_qos.size(); ++l) {
            put(index, "qos_slice" + std::to_string(l), slice_qos[l], std::string(env::qos_unit(slices[l].kind)));
            qos_samples[l].push_back(slice_qos[l]);
        }
        for (std::size_t n = 0; n < ue_throughput.size(); ++n) {
            put(index, "throughput_ue" + std::to_string(n), ue_throughput[n], "bit/s");
            throughput_samples[static_cast<std::size_t>(ue_slice[n])].push_back(ue_throughput[n]);
        }
    }
};

void write_cdfs(const Recorder& rec, int grid, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "series,value,probability\n";
    char buf[96];
    auto emit = [&](const std::string& name, const std::vector<double>& samples) {
        if (samples.empty()) return;
        for (const auto& [x, p] : export_cdf(samples, grid)) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", x, p);
            out << name << ',' << buf << '\n';
        }
    };
    for (std::size_t l = 0; l < rec.qos_samples.size(); ++l) emit("qos_slice" + std::to_string(l), rec.qos_samples[l]);
    for (std::size_t l = 0; l < rec.throughput_samples.size(); ++l)
        emit("throughput_slice" + std::to_string(l), rec.throughput_samples[l]);
}

nn::MlpNet load_actor(const RunConfig& cfg) {
    std::ifstream in(cfg.checkpoint, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + cfg.checkpoint);
    char magic[8] = {};
    in.read(magic, 8);
    in.seekg(0);
    if (std::string(magic, 8) == std::string("EDRLDDPG", 8))
        return ddpg::DdpgAgent::load(in, cfg.ddpg).actor();
    return nn::load_checkpoint(in);
}

}  // namespace

void run(const RunConfig& cfg, std::ostream* log) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    save_config(cfg, dir / "resolved_config.json");

    std::ofstream metrics_file(dir / "metrics.csv");
    if (!metrics_file) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
    MetricsWriter writer(metrics_file);

    std::vector<int> ue_slice;
    for (const auto& s : cfg.slices) {
        ue_slice.insert(ue_slice.end(), static_cast<std::size_t>(s.num_ues), s.id);
    }
    Recorder rec{writer, run_id(cfg), cfg.slices, std::vector<std::vector<double>>(cfg.slices.size()),
                 std::vector<std::vector<double>>(cfg.slices.size()), ue_slice};

    switch (cfg.mode) {
        case Mode::edrl: {
            auto sink = [&](const orchestrator::GenerationStats& st) {
                const long g = st.generation;
                rec.put(g, "env_steps", static_cast<double>(st.env_steps), "steps");
                rec.put(g, "return", st.champion_return, "reward");
                rec.put(g, "train_return", st.champion_train_return, "reward");
                rec.put(g, "best_fitness", st.best_fitness, "reward");
                rec.put(g, "mean_fitness", st.mean_fitness, "reward");
                rec.put(g, "rl_fitness", st.rl_fitness, "reward");
                rec.put(g, "rl_return", st.rl_return, "reward");
                rec.put(g, "critic_loss", st.critic_loss, "loss");
                rec.put(g, "actor_objective", st.actor_objective, "q");
                rec.put(g, "grad_steps", st.grad_steps, "steps");
                rec.put(g, "champion", static_cast<double>(st.champion), "index");
                rec.put(g, "ea_to_rl", st.ea_to_rl ? 1.0 : 0.0, "flag");
                rec.put(g, "rl_to_ea", st.rl_to_ea ? 1.0 : 0.0, "flag");
                for (std::size_t i = 0; i < st.fitness.size(); ++i)
                    rec.put(g, "fitness_" + std::to_string(i), st.fitness[i], "reward");
                rec.qos(g, st.slice_qos, st.ue_throughput);
                rec.put(g, "converged", st.converged ? 1.0 : 0.0, "flag");
                metrics_file.flush();
                if (log)
                    *log << "generation " << g << ": return " << st.champion_return << ", best fitness "
                         << st.best_fitness << ", rl fitness " << st.rl_fitness << ", critic loss "
                         << st.critic_loss << '\n';
            };
            auto result = orchestrator::run_edrl(cfg.edrl, cfg.cell, cfg.slices, cfg.evo, cfg.ddpg, sink);
            result.agent.save((dir / "agent.ckpt").string());
            nn::save_checkpoint(result.agent.actor(), (dir / "actor.net").string());
            break;
        }
        case Mode::drl: {
            auto sink = [&](const orchestrator::EpisodeStats& st) {
                const long e = st.episode;
                rec.put(e, "env_steps", static_cast<double>(st.env_steps), "steps");
                rec.put(e, "return", st.test_return, "reward");
                rec.put(e, "train_return", st.train_return, "reward");
                rec.put(e, "fitness", st.fitness, "reward");
                rec.put(e, "critic_loss", st.critic_loss, "loss");
                rec.put(e, "actor_objective", st.actor_objective, "q");
                rec.put(e, "grad_steps", st.grad_steps, "steps");
                rec.qos(e, st.slice_qos, st.ue_throughput);
                metrics_file.flush();
                if (log)
                    *log << "episode " << e << ": return " << st.test_return << ", train return "
                         << st.train_return << ", critic loss " << st.critic_loss << '\n';
            };
            auto result = orchestrator::run_drl_baseline(cfg.edrl, cfg.cell, cfg.slices, cfg.evo, cfg.ddpg, {}, sink);
            result.agent.save((dir / "agent.ckpt").string());
            nn::save_checkpoint(result.agent.actor(), (dir / "actor.net").string());
            break;
        }
        case Mode::eval_only: {
            const nn::MlpNet actor = load_actor(cfg);
            mdp::SlicingTask task(cfg.cell, cfg.slices, cfg.edrl.ttis_per_step);
            if (actor.input_size() != task.state_dim() || actor.output_size() != task.action_dim())
                throw ContractViolation("checkpoint dimensions do not match the configured MDP");
            for (int e = 1; e <= cfg.eval_episodes; ++e) {
                const auto seed = derive_seed(cfg.edrl.seed, {stream::eval_only, static_cast<std::uint64_t>(e)});
                const auto r = evo::evaluate(actor, task, seed, cfg.edrl.episode_length, cfg.ddpg.gamma);
                rec.put(e, "return", r.discounted_return, "reward");
                rec.put(e, "fitness", r.fitness, "reward");
                rec.qos(e, r.mean_slice_qos, r.mean_throughput);
                if (log) *log << "episode " << e << ": return " << r.discounted_return << '\n';
            }
            break;
        }
    }
    write_cdfs(rec, cfg.cdf_grid, dir / "cdf.csv");
}

}  // namespace edrl::experiment
