#include "powermarket/commands.hpp"

#include "powermarket/errors.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace powermarket {

namespace fs = std::filesystem;

namespace {

std::string num(double v)
{
    if (std::isnan(v)) {
        return "";
    }
    if (std::isinf(v)) {
        return v < 0 ? "-inf" : "inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const RunConfig& config) : out_(path, std::ios::binary)
    {
        if (!out_) {
            throw error("cannot write '" + path.string() + "'");
        }
        out_ << "# powermarket " << version_string << '\n';
        out_ << "# config_hash " << config_hash(config) << '\n';
    }

    void meta(const std::string& key, const std::string& value) { out_ << "# " << key << ' ' << value << '\n'; }

    template <class... Fields>
    void row(const Fields&... fields)
    {
        bool first = true;
        ((out_ << (first ? "" : ",") << fields, first = false), ...);
        out_ << '\n';
    }

    void close()
    {
        out_.close();
        if (!out_) {
            throw error("write failed");
        }
    }

private:
    std::ofstream out_;
};

nlohmann::ordered_json bound(double v)
{
    if (std::isinf(v)) {
        return v < 0 ? "-inf" : "inf";
    }
    return v;
}

nlohmann::ordered_json summary_json(const RunConfig& config, const SummaryStats& s)
{
    nlohmann::ordered_json j;
    j["version"] = version_string;
    j["seed"] = config.seed;
    j["config_hash"] = config_hash(config);
    j["config"] = to_json(config);
    j["steps"] = s.steps;
    j["n_agents"] = s.n_agents;
    j["D_bar"] = s.d_bar_total;
    j["d_bar"] = s.d_bar_agent;
    if (s.avg_consumer_price) j["avg_consumer_price"] = *s.avg_consumer_price;
    j["max_D"] = s.max_demand;
    if (s.max_d_over_dbar) j["max_D_over_Dbar"] = *s.max_d_over_dbar;
    if (s.tail_cutoff_q999) j["tail_cutoff_q999"] = *s.tail_cutoff_q999;
    auto shares = nlohmann::ordered_json::array();
    for (const auto& is : s.interval_shares) {
        shares.push_back({{"price_lo", bound(is.interval.lo)},
                          {"price_hi", bound(is.interval.hi)},
                          {"time_share", is.shares.time_share},
                          {"demand_share", is.shares.demand_share}});
    }
    j["interval_shares"] = shares;
    if (s.fit) {
        j["demand_curve_fit"] = {
            {"slope", s.fit->slope}, {"intercept", s.fit->intercept}, {"r2", s.fit->r2}, {"bins_used", s.fit->bins_used}};
    }
    return j;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw error("cannot write '" + path.string() + "'");
    }
}

}  // namespace

void write_run_outputs(const fs::path& dir, const RunConfig& config, const RunResult& result)
{
    const auto& acc = result.stats;
    write_text(dir / "summary.json", summary_json(config, result.summary).dump(2) + "\n");

    {
        CsvWriter csv(dir / "threshold_density.csv", config);
        csv.row("threshold_lo", "threshold_hi", "density", "occupancy");
        for (const auto& b : threshold_density(acc)) {
            csv.row(num(b.lo), num(b.hi), num(b.density), b.raw);
        }
        csv.close();
    }
    {
        CsvWriter price_csv(dir / "price_density.csv", config);
        CsvWriter load_csv(dir / "load_price_density.csv", config);
        price_csv.meta("steps_outside_range", std::to_string(acc.price_hist().underflow() + acc.price_hist().overflow()));
        try {
            const auto d = load_price_density(acc);
            load_csv.meta("load_outside_range", std::to_string(d.load_outside));
            price_csv.row("price_lo", "price_hi", "density", "steps");
            load_csv.row("price_lo", "price_hi", "density", "load");
            for (std::size_t b = 0; b < d.price.size(); ++b) {
                price_csv.row(num(d.price[b].lo), num(d.price[b].hi), num(d.price[b].density), d.price[b].raw);
                load_csv.row(num(d.load[b].lo), num(d.load[b].hi), num(d.load[b].density), d.load[b].raw);
            }
        } catch (const undefined_statistic& e) {
            load_csv.meta("undefined", e.what());
            load_csv.row("price_lo", "price_hi", "density", "load");
            price_csv.row("price_lo", "price_hi", "density", "steps");
            const auto& h = acc.price_hist();
            const double mass = static_cast<double>(h.in_range_total());
            for (std::size_t b = 0; b < h.bins(); ++b) {
                price_csv.row(num(h.lower_edge(b)), num(h.upper_edge(b)),
                              num(mass > 0 ? static_cast<double>(h.count(b)) / (mass * h.width(b)) : 0.0), h.count(b));
            }
        }
        price_csv.close();
        load_csv.close();
    }
    {
        const auto dist = demand_distribution(acc);
        CsvWriter csv(dir / "demand_hist.csv", config);
        csv.meta("D_bar", num(dist.d_bar));
        csv.meta("zero_count", std::to_string(dist.zero_count));
        csv.meta("underflow", std::to_string(dist.underflow));
        csv.meta("overflow", std::to_string(dist.overflow));
        csv.row("x_lo", "x_hi", "x_center", "density", "count");
        for (const auto& b : dist.bins) {
            csv.row(num(b.lo), num(b.hi), num(b.center), num(b.density), b.count);
        }
        csv.close();
    }
    {
        const auto m = demand_price_matrix(acc);
        CsvWriter csv(dir / "demand_price_matrix.csv", config);
        csv.meta("rows", "row 0 is D=0; row r>=1 spans D/D_bar in [x_lo, x_hi)");
        csv.meta("cols", "col 0 is below the price range, the last col above it");
        csv.row("row", "x_lo", "x_hi", "col", "price_lo", "price_hi", "count");
        const double inf = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double x_lo = r == 0 ? 0.0 : m.demand_edges[r - 1];
            const double x_hi = r == 0 ? 0.0 : m.demand_edges[r];
            for (std::size_t c = 0; c < m.cols; ++c) {
                const double p_lo = c == 0 ? -inf : m.price_edges[c - 1];
                const double p_hi = c + 1 == m.cols ? inf : m.price_edges[c];
                csv.row(r, num(x_lo), num(x_hi), c, num(p_lo), num(p_hi), m.at(r, c));
            }
        }
        csv.close();

        CsvWriter curve(dir / "demand_curve.csv", config);
        curve.row("price_lo", "price_hi", "price_center", "steps", "load", "mean_demand");
        for (const auto& pt : m.curve) {
            curve.row(num(pt.price_lo), num(pt.price_hi), num(pt.price_center), pt.steps, pt.load, num(pt.mean_demand));
        }
        curve.close();
    }
}

int run_command(const RunConfig& config, std::ostream& log)
{
    const fs::path dir = config.outputs.dir;
    fs::create_directories(dir);

    std::unique_ptr<CsvWriter> series;
    StepObserver observer;
    std::int64_t counter = 0;
    if (config.outputs.timeseries_stride > 0) {
        series = std::make_unique<CsvWriter>(dir / "timeseries.csv", config);
        series->row("t", "price", "demand");
        observer = [&](const StepResult& s) {
            if (counter++ % config.outputs.timeseries_stride == 0) {
                series->row(s.t, num(s.price), s.demand);
            }
        };
    }
    const RunResult result = simulate(config, observer);
    if (series) {
        series->close();
    }
    write_run_outputs(dir, config, result);
    for (const auto& problem : check_conservation(result.stats)) {
        log << "warning: " << problem << '\n';
    }
    log << "D_bar=" << result.summary.d_bar_total << " d_bar=" << result.summary.d_bar_agent;
    if (result.summary.avg_consumer_price) {
        log << " avg_consumer_price=" << *result.summary.avg_consumer_price;
    }
    log << " -> " << dir.string() << '\n';
    return exit_ok;
}

int sweep_command(const SweepConfig& sweep, std::ostream& log)
{
    const fs::path root = sweep.base.outputs.dir;
    fs::create_directories(root);

    struct Point {
        RunConfig config;
        std::optional<SummaryStats> summary;
        std::string error;
    };
    std::vector<Point> points;
    for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        RunConfig c = apply_axis(sweep.base, sweep.axis, sweep.values[i]);
        c.seed = sweep_run_seed(sweep.base.seed, i);
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        c.outputs.dir = (root / name).string();
        points.push_back({std::move(c), std::nullopt, {}});
    }

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            auto& p = points[i];
            try {
                fs::create_directories(p.config.outputs.dir);
                const RunResult result = simulate(p.config);
                write_run_outputs(p.config.outputs.dir, p.config, result);
                p.summary = result.summary;
            } catch (const std::exception& e) {
                p.error = e.what();
            }
            const std::lock_guard lock(log_mutex);
            log << sweep.axis << '=' << sweep.values[i] << (p.error.empty() ? " done" : " failed: " + p.error) << '\n';
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(sweep.parallelism), points.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    CsvWriter csv(root / "sweep_summary.csv", sweep.base);
    csv.meta("axis", sweep.axis);
    csv.row(sweep.axis, "seed", "D_bar", "d_bar", "avg_consumer_price", "tail_cutoff_q999", "fit_slope", "fit_r2",
            "status");
    bool failed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (!p.summary) {
            failed = true;
            csv.row(num(sweep.values[i]), p.config.seed, "", "", "", "", "", "", "failed");
            continue;
        }
        const auto& s = *p.summary;
        csv.row(num(sweep.values[i]), p.config.seed, num(s.d_bar_total), num(s.d_bar_agent),
                num(s.avg_consumer_price.value_or(nan)), num(s.tail_cutoff_q999.value_or(nan)),
                num(s.fit ? s.fit->slope : nan), num(s.fit ? s.fit->r2 : nan), "ok");
    }
    csv.close();
    return failed ? exit_run_error : exit_ok;
}

int check_command(const RunConfig& config, std::ostream& log)
{
    EquivalenceSeeds seeds{derive_seed(config.seed, Stream::price), derive_seed(config.seed, 3),
                           derive_seed(config.seed, 4)};
    EquivalenceOptions options;
    options.warmup = config.warmup;
    options.intervals = resolve_stats_config(config).intervals;
    const auto report = equivalence_check(config.n_agents, config.t_steps, config.f, config.price, seeds, options);
    for (const auto& c : report.comparisons) {
        log << (c.passed ? "PASS " : "FAIL ") << c.statistic;
        if (c.p_value) {
            log << ": bins=" << c.bins_used << " statistic=" << c.distance << " critical=" << c.bound
                << " p=" << *c.p_value << '\n';
        } else {
            log << ": reference=" << c.reference << " fast=" << c.fast << " distance=" << c.distance
                << " bound=" << c.bound << '\n';
        }
    }
    log << (report.passed ? "engines agree" : "engines disagree") << '\n';
    return report.passed ? exit_ok : exit_run_error;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    static const char* usage =
        "usage: powermarket <run|sweep|check> [--config FILE] [--out DIR] [--key value ...]\n"
        "  keys use the config-file names, e.g. --n_agents 100000 --price.kind gaussian --price.sigma 0.05\n";
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        (args.empty() ? err : out) << usage;
        return args.empty() ? exit_config_error : exit_ok;
    }
    const std::string& command = args[0];
    try {
        if (command != "run" && command != "sweep" && command != "check") {
            throw config_error("unknown command '" + command + "'");
        }
        std::optional<std::string> config_path;
        Settings overrides;
        for (std::size_t i = 1; i < args.size(); ++i) {
            std::string key = args[i];
            if (!key.starts_with("--")) {
                throw config_error("unexpected argument '" + key + "'");
            }
            key.erase(0, 2);
            std::string value;
            if (const auto eq = key.find('='); eq != std::string::npos) {
                value = key.substr(eq + 1);
                key.erase(eq);
            } else {
                if (i + 1 >= args.size()) {
                    throw config_error(key + ": missing value");
                }
                value = args[++i];
            }
            if (key == "config") {
                config_path = value;
            } else if (key == "out") {
                overrides["out.dir"] = value;
            } else {
                overrides[key] = value;
            }
        }
        Settings settings = config_path ? read_settings_file(*config_path) : Settings{};
        for (const auto& [k, v] : overrides) {
            settings[k] = v;
        }
        if (command == "sweep") {
            return sweep_command(parse_sweep_config(settings), out);
        }
        const RunConfig config = parse_config(settings);
        return command == "run" ? run_command(config, out) : check_command(config, out);
    } catch (const config_error& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_run_error;
    }
}

}  // namespace powermarket
