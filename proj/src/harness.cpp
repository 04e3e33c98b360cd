#include "cosm/harness.hpp"

#include "cosm/kdtree.hpp"
#include "cosm/pcd_io.hpp"
#include "cosm/registration.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace cosm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Plan

void ExperimentPlan::validate() const {
    if (runs < 1) throw std::invalid_argument("plan needs at least one run");
    if (methods.empty()) throw std::invalid_argument("plan needs at least one method");
    if (sigmas.empty()) throw std::invalid_argument("plan needs at least one sigma");
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("sigma values must be positive");
    }
    if (outlier_fractions.empty()) throw std::invalid_argument("plan needs at least one outlier fraction (0 = clean)");
    for (double f : outlier_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("outlier fractions must be in [0, 1]");
    }
    if (outlier_offset_std && !(*outlier_offset_std >= 0.0)) {
        throw std::invalid_argument("offset_std must be nonnegative");
    }
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (voxel_leaf && !(*voxel_leaf > 0.0)) throw NonPositiveLeaf("voxel leaf size must be positive");
    sampler.validate();
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw std::invalid_argument("plan key '" + key + "': '" + v + "' is not a number");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("plan key '" + key + "': '" + v + "' is not a nonnegative integer");
    }
    return out;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto l = lower(v);
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw std::invalid_argument("plan key '" + key + "': '" + v + "' is not a boolean");
}

void apply_plan_key(ExperimentPlan& plan, const std::string& key, const std::string& value) {
    if (key == "input") {
        plan.input = value;
    } else if (key == "methods") {
        plan.methods.clear();
        for (const auto& m : split_list(value)) plan.methods.push_back(parse_method(m));
    } else if (key == "runs") {
        plan.runs = static_cast<std::size_t>(to_uint(key, value));
    } else if (key == "sampler") {
        const auto l = lower(value);
        if (l == "uniform") plan.sampler.mode = SamplerMode::Uniform;
        else if (l == "gaussian") plan.sampler.mode = SamplerMode::Gaussian;
        else throw std::invalid_argument("plan key 'sampler' must be uniform or gaussian");
    } else if (key == "angle_bound") {
        plan.sampler.angle_bound = to_real(key, value);
    } else if (key == "trans_bound") {
        plan.sampler.trans_bound = to_real(key, value);
    } else if (key == "angle_std") {
        plan.sampler.angle_std = to_real(key, value);
    } else if (key == "trans_std") {
        plan.sampler.trans_std = to_real(key, value);
    } else if (key == "outliers") {
        if (lower(value) == "sweep") {
            plan.outlier_fractions = ExperimentPlan::outlier_sweep_preset();
        } else {
            plan.outlier_fractions.clear();
            for (const auto& f : split_list(value)) plan.outlier_fractions.push_back(to_real(key, f));
        }
    } else if (key == "offset_std") {
        plan.outlier_offset_std = to_real(key, value);
    } else if (key == "sigmas" || key == "sigma") {
        plan.sigmas.clear();
        for (const auto& s : split_list(value)) plan.sigmas.push_back(to_real(key, s));
    } else if (key == "iterations") {
        plan.iterations = static_cast<int>(to_uint(key, value));
    } else if (key == "seed") {
        plan.master_seed = to_uint(key, value);
    } else if (key == "leaf") {
        plan.voxel_leaf = to_real(key, value);
    } else if (key == "mirror") {
        plan.mirror = to_bool(key, value);
    } else if (key == "threads") {
        plan.threads = static_cast<unsigned>(to_uint(key, value));
    } else {
        throw std::invalid_argument("unknown plan key '" + key + "'");
    }
}

std::string json_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) out += (out.empty() ? "" : ",") + json_scalar(e);
        return out;
    }
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    throw std::invalid_argument("unsupported JSON value in plan");
}

}  // namespace

ExperimentPlan parse_plan(std::string_view text) {
    ExperimentPlan plan;
    const auto body = trim(text);
    if (!body.empty() && body.front() == '{') {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(std::string("plan JSON: ") + e.what());
        }
        for (const auto& [key, value] : j.items()) apply_plan_key(plan, key, json_scalar(value));
    } else {
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("plan line " + std::to_string(number) + ": expected key = value");
            }
            apply_plan_key(plan, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    plan.validate();
    return plan;
}

// ---------------------------------------------------------------------------
// Running

EulerPose pose_for_run(const ExperimentPlan& plan, std::size_t run) {
    TransformSampler s = plan.sampler;
    s.seed = derive_seed(plan.master_seed, run);
    return PoseSampler(s).next();
}

std::uint64_t outlier_seed(std::uint64_t master_seed, std::size_t run, double fraction) {
    return derive_seed(derive_seed(master_seed, run), std::bit_cast<std::uint64_t>(fraction));
}

namespace {

struct RunContext {
    const ExperimentPlan& plan;
    const PointCloud& target;
    const KdTree& tree;
};

BenchmarkRecord make_record(std::size_t run, Method method, const EulerPose& pose, double fraction, double sigma) {
    BenchmarkRecord rec;
    rec.run = run;
    rec.method = method;
    rec.pose = pose;
    rec.outlier_fraction = fraction;
    rec.sigma = sigma;
    return rec;
}

void register_into(BenchmarkRecord& rec, const RunContext& ctx, const PointCloud& source,
                   const RigidTransform& truth) {
    RegistrationConfig cfg;
    cfg.method = rec.method;
    cfg.sigma = rec.sigma;
    cfg.max_iterations = ctx.plan.iterations;
    cfg.mirror = ctx.plan.mirror;

    const auto start = std::chrono::steady_clock::now();
    try {
        const auto report = register_clouds(source, ctx.target, ctx.tree, cfg);
        rec.rmse_trace = report.rmse_trace;
        rec.final_rmse = report.final_rmse();
        rec.iterations = report.iterations;
        rec.max_rotation_defect = report.max_rotation_defect;
        // Perfect recovery gives final ∘ truth = identity.
        const auto residual = compose(report.final_transform, truth);
        rec.rot_err_rad = rotation_angle_between(residual.rotation(), Matrix3::Identity());
        rec.trans_err = residual.translation().norm();
        rec.status = report.degenerate_iterations > 0 ? "degenerate" : "ok";
    } catch (const std::exception& e) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rec.final_rmse = rec.rot_err_rad = rec.trans_err = nan;
        rec.status = std::string("error: ") + e.what();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::vector<BenchmarkRecord> run_one(const RunContext& ctx, std::size_t run) {
    const auto& plan = ctx.plan;
    const EulerPose pose = pose_for_run(plan, run);
    const RigidTransform truth = euler_to_transform(pose);
    const PointCloud clean_source = apply(truth, ctx.target);

    std::vector<BenchmarkRecord> out;
    for (double fraction : plan.outlier_fractions) {
        PointCloud source = clean_source;
        if (fraction > 0.0) {
            OutlierSpec spec{fraction, plan.outlier_offset_std, outlier_seed(plan.master_seed, run, fraction)};
            source = inject_outliers(clean_source, spec).cloud;
        }
        // The SVD baseline ignores sigma; compute it once per fraction and reuse it.
        std::optional<BenchmarkRecord> svd_result;
        for (double sigma : plan.sigmas) {
            for (Method method : plan.methods) {
                auto rec = make_record(run, method, pose, fraction, sigma);
                if (method == Method::StandardSVD && svd_result) {
                    auto copy = *svd_result;
                    copy.sigma = sigma;
                    out.push_back(std::move(copy));
                    continue;
                }
                register_into(rec, ctx, source, truth);
                if (method == Method::StandardSVD) svd_result = rec;
                out.push_back(std::move(rec));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<BenchmarkRecord> run_plan(const ExperimentPlan& plan) {
    plan.validate();
    const PointCloud cloud = pcd::read_file(plan.input);
    return run_plan(plan, cloud);
}

std::vector<BenchmarkRecord> run_plan(const ExperimentPlan& plan, const PointCloud& cloud) {
    plan.validate();
    if (cloud.empty()) throw std::invalid_argument("input cloud is empty");
    const PointCloud target = plan.voxel_leaf ? voxel_grid_filter(cloud, *plan.voxel_leaf) : cloud;
    const KdTree tree(target);
    const RunContext ctx{plan, target, tree};

    std::vector<std::vector<BenchmarkRecord>> per_run(plan.runs);
    unsigned workers = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, plan.runs));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t r = next++; r < plan.runs; r = next++) {
            try {
                per_run[r] = run_one(ctx, r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<BenchmarkRecord> records;
    for (auto& rs : per_run) {
        for (auto& r : rs) records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Aggregation

double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw EmptyInput("percentile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

AggregateSummary aggregate(const std::vector<BenchmarkRecord>& records) {
    if (records.empty()) throw EmptyInput("no benchmark records to aggregate");

    using Key = std::tuple<int, double, double>;  // method, fraction, sigma
    std::vector<Key> order;
    std::map<Key, std::vector<double>> values;
    for (const auto& r : records) {
        Key k{static_cast<int>(r.method), r.outlier_fraction, r.sigma};
        auto [it, inserted] = values.try_emplace(k);
        if (inserted) order.push_back(k);
        it->second.push_back(r.final_rmse);
    }

    AggregateSummary out;
    for (const auto& k : order) {
        auto v = values[k];
        std::sort(v.begin(), v.end());
        GroupStats g;
        g.method = static_cast<Method>(std::get<0>(k));
        g.outlier_fraction = std::get<1>(k);
        g.sigma = std::get<2>(k);
        g.count = v.size();
        double sum = 0.0;
        for (double x : v) sum += x;
        g.mean = sum / static_cast<double>(v.size());
        g.median = percentile_sorted(v, 0.5);
        g.p25 = percentile_sorted(v, 0.25);
        g.p75 = percentile_sorted(v, 0.75);
        out.groups.push_back(g);
    }

    // Pair CoSM with every other method on the same (run, fraction, sigma).
    using RunKey = std::tuple<std::size_t, double, double>;
    std::map<RunKey, double> cosm;
    for (const auto& r : records) {
        if (r.method == Method::CoSM) cosm.emplace(RunKey{r.run, r.outlier_fraction, r.sigma}, r.final_rmse);
    }
    std::vector<Key> win_order;
    std::map<Key, WinRate> wins;
    for (const auto& r : records) {
        if (r.method == Method::CoSM) continue;
        const auto c = cosm.find(RunKey{r.run, r.outlier_fraction, r.sigma});
        if (c == cosm.end()) continue;
        Key k{static_cast<int>(r.method), r.outlier_fraction, r.sigma};
        auto [it, inserted] = wins.try_emplace(k);
        if (inserted) {
            win_order.push_back(k);
            it->second.other = r.method;
            it->second.outlier_fraction = r.outlier_fraction;
            it->second.sigma = r.sigma;
        }
        ++it->second.compared;
        if (c->second < r.final_rmse) ++it->second.wins;
    }
    for (const auto& k : win_order) {
        auto w = wins[k];
        w.rate = static_cast<double>(w.wins) / static_cast<double>(w.compared);
        out.win_rates.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

json record_to_json(const BenchmarkRecord& r, bool timing) {
    return json{{"run", r.run},
                {"method", std::string(to_string(r.method))},
                {"sigma", r.sigma},
                {"outlier_fraction", r.outlier_fraction},
                {"pose",
                 {{"roll", r.pose.roll},
                  {"pitch", r.pose.pitch},
                  {"yaw", r.pose.yaw},
                  {"tx", r.pose.tx},
                  {"ty", r.pose.ty},
                  {"tz", r.pose.tz}}},
                {"final_rmse", r.final_rmse},
                {"rmse_trace", r.rmse_trace},
                {"rot_err_rad", r.rot_err_rad},
                {"trans_err", r.trans_err},
                {"iters", r.iterations},
                {"wall_ms", timing ? r.wall_ms : 0.0},
                {"status", r.status},
                {"max_rotation_defect", r.max_rotation_defect}};
}

json summary_to_json(const AggregateSummary& s) {
    json groups = json::array();
    for (const auto& g : s.groups) {
        groups.push_back({{"method", std::string(to_string(g.method))},
                          {"outlier_fraction", g.outlier_fraction},
                          {"sigma", g.sigma},
                          {"count", g.count},
                          {"mean", g.mean},
                          {"median", g.median},
                          {"p25", g.p25},
                          {"p75", g.p75}});
    }
    json wins = json::array();
    for (const auto& w : s.win_rates) {
        wins.push_back({{"other", std::string(to_string(w.other))},
                        {"outlier_fraction", w.outlier_fraction},
                        {"sigma", w.sigma},
                        {"wins", w.wins},
                        {"compared", w.compared},
                        {"rate", w.rate}});
    }
    return {{"groups", groups}, {"cosm_win_rates", wins}};
}

// NaN / inf are written as null by the JSON library.
double json_real(const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_real(const std::string& s) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw std::invalid_argument("CSV field '" + s + "' is not a number");
    return v;
}

}  // namespace

std::string export_records(const std::vector<BenchmarkRecord>& records, const AggregateSummary& summary,
                           ExportFormat format, bool timing) {
    if (records.empty()) throw EmptyInput("no benchmark records to export");
    if (format == ExportFormat::Json) {
        json j;
        j["records"] = json::array();
        for (const auto& r : records) j["records"].push_back(record_to_json(r, timing));
        j["summary"] = summary_to_json(summary);
        return j.dump(2) + "\n";
    }
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : records) {
        const std::vector<std::string> fields = {std::to_string(r.run),
                                                 std::string(to_string(r.method)),
                                                 fmt17(r.sigma),
                                                 fmt17(r.outlier_fraction),
                                                 fmt17(r.pose.roll),
                                                 fmt17(r.pose.pitch),
                                                 fmt17(r.pose.yaw),
                                                 fmt17(r.pose.tx),
                                                 fmt17(r.pose.ty),
                                                 fmt17(r.pose.tz),
                                                 fmt17(r.final_rmse),
                                                 fmt17(r.rot_err_rad),
                                                 fmt17(r.trans_err),
                                                 std::to_string(r.iterations),
                                                 timing ? fmt17(r.wall_ms) : std::string("0"),
                                                 csv_field(r.status)};
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += fields[i];
        }
        out += '\n';
    }
    return out;
}

std::vector<BenchmarkRecord> parse_records_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader) {
        throw std::invalid_argument("CSV does not start with the benchmark header");
    }
    std::vector<BenchmarkRecord> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 16) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " columns");
        BenchmarkRecord r;
        r.run = static_cast<std::size_t>(to_uint("run", f[0]));
        r.method = parse_method(f[1]);
        r.sigma = parse_real(f[2]);
        r.outlier_fraction = parse_real(f[3]);
        r.pose = {parse_real(f[4]), parse_real(f[5]), parse_real(f[6]),
                  parse_real(f[7]), parse_real(f[8]), parse_real(f[9])};
        r.final_rmse = parse_real(f[10]);
        r.rot_err_rad = parse_real(f[11]);
        r.trans_err = parse_real(f[12]);
        r.iterations = static_cast<std::size_t>(to_uint("iters", f[13]));
        r.wall_ms = parse_real(f[14]);
        r.status = f[15];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<BenchmarkRecord> parse_records_json(std::string_view text) {
    const json j = json::parse(text);
    std::vector<BenchmarkRecord> out;
    for (const auto& e : j.at("records")) {
        BenchmarkRecord r;
        r.run = e.at("run").get<std::size_t>();
        r.method = parse_method(e.at("method").get<std::string>());
        r.sigma = json_real(e.at("sigma"));
        r.outlier_fraction = json_real(e.at("outlier_fraction"));
        const auto& p = e.at("pose");
        r.pose = {json_real(p.at("roll")), json_real(p.at("pitch")), json_real(p.at("yaw")),
                  json_real(p.at("tx")),   json_real(p.at("ty")),    json_real(p.at("tz"))};
        r.final_rmse = json_real(e.at("final_rmse"));
        for (const auto& v : e.at("rmse_trace")) r.rmse_trace.push_back(json_real(v));
        r.rot_err_rad = json_real(e.at("rot_err_rad"));
        r.trans_err = json_real(e.at("trans_err"));
        r.iterations = e.at("iters").get<std::size_t>();
        r.wall_ms = json_real(e.at("wall_ms"));
        r.status = e.at("status").get<std::string>();
        r.max_rotation_defect = json_real(e.value("max_rotation_defect", json(0.0)));
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_summary(const AggregateSummary& summary) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-6s %9s %10s %6s %13s %13s %13s %13s\n", "method", "outliers", "sigma", "runs",
                  "mean", "p25", "median", "p75");
    out += buf;
    for (const auto& g : summary.groups) {
        std::snprintf(buf, sizeof(buf), "%-6s %9.3g %10.4g %6zu %13.6g %13.6g %13.6g %13.6g\n",
                      std::string(to_string(g.method)).c_str(), g.outlier_fraction, g.sigma, g.count, g.mean, g.p25,
                      g.median, g.p75);
        out += buf;
    }
    for (const auto& w : summary.win_rates) {
        std::snprintf(buf, sizeof(buf), "cosm < %s (outliers %.3g, sigma %.4g): %zu/%zu = %.3f\n",
                      std::string(to_string(w.other)).c_str(), w.outlier_fraction, w.sigma, w.wins, w.compared,
                      w.rate);
        out += buf;
    }
    return out;
}

}  // namespace cosm
