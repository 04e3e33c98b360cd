#include "cosm/cli.hpp"

#include "cosm/harness.hpp"
#include "cosm/pcd_io.hpp"
#include "cosm/preprocess.hpp"
#include "cosm/registration.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cosm::cli {

namespace {

// Thrown for bad flag values that CLI11 itself cannot catch.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pcd::InputUnreadable("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw pcd::InputUnreadable("cannot write '" + path + "'");
}

Method method_flag(const std::string& name) {
    try {
        return parse_method(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

SamplerMode sampler_flag(const std::string& name) {
    if (name == "uniform") return SamplerMode::Uniform;
    if (name == "gaussian") return SamplerMode::Gaussian;
    throw UsageError("--sampler must be uniform or gaussian");
}

void print_matrix(std::ostream& out, const Matrix4& m) {
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) out << (c ? " " : "") << fmt17(m(r, c));
        out << '\n';
    }
}

void print_pose(std::ostream& out, const EulerPose& p) {
    out << fmt17(p.roll) << ' ' << fmt17(p.pitch) << ' ' << fmt17(p.yaw) << ' ' << fmt17(p.tx) << ' '
        << fmt17(p.ty) << ' ' << fmt17(p.tz) << '\n';
}

EulerPose pose_from(const std::vector<double>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

struct Options {
    // shared
    std::string in, out, source, target;
    std::uint64_t seed = 0;

    double leaf = 0.0;

    std::string sampler = "gaussian";
    TransformSampler bounds;
    std::size_t count = 1;
    bool as_matrix = false;

    std::vector<double> pose;

    double fraction = 0.0;
    double offset_std = 0.0;

    std::string method = "cosm";
    double sigma = 100.0;
    int iters = 50;
    double rmse_tol = 0.0;
    double rmse_rel_tol = 0.0;
    bool no_mirror = false;
    std::string json_path;

    std::string plan_path;
    std::size_t runs = 0;
    std::vector<std::string> methods;
    std::vector<double> sigmas;
    std::string outliers;
    double leaf_bench = 0.0;
    unsigned threads = 0;
    std::string format = "csv";
    bool no_timing = false;
};

int do_downsample(const Options& o, std::ostream& out) {
    if (!(o.leaf > 0.0)) throw UsageError("--leaf must be positive");
    const auto cloud = pcd::read_file(o.in);
    const auto filtered = voxel_grid_filter(cloud, o.leaf);
    pcd::write_file(o.out, filtered);
    out << cloud.size() << " -> " << filtered.size() << '\n';
    return kSuccess;
}

int do_gen_transform(const Options& o, std::ostream& out) {
    TransformSampler s = o.bounds;
    s.mode = sampler_flag(o.sampler);
    s.seed = o.seed;
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    PoseSampler sampler(s);
    for (std::size_t i = 0; i < o.count; ++i) {
        const auto pose = sampler.next();
        if (o.as_matrix) {
            print_matrix(out, euler_to_transform(pose).homogeneous());
        } else {
            print_pose(out, pose);
        }
    }
    return kSuccess;
}

int do_transform(const Options& o, std::ostream& out) {
    const auto cloud = pcd::read_file(o.in);
    const auto t = euler_to_transform(pose_from(o.pose));
    pcd::write_file(o.out, apply(t, cloud));
    print_matrix(out, t.homogeneous());
    return kSuccess;
}

int do_inject(const Options& o, std::ostream& out, bool offset_given) {
    OutlierSpec spec;
    spec.fraction = o.fraction;
    spec.seed = o.seed;
    if (offset_given) spec.offset_std = o.offset_std;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto cloud = pcd::read_file(o.in);
    const auto result = inject_outliers(cloud, spec);
    pcd::write_file(o.out, result.cloud);
    out << result.indices.size() << " of " << cloud.size() << " points displaced\n";
    return kSuccess;
}

int do_register(const Options& o, std::ostream& out, std::ostream& err) {
    RegistrationConfig cfg;
    cfg.method = method_flag(o.method);
    cfg.sigma = o.sigma;
    cfg.max_iterations = o.iters;
    cfg.rmse_abs_tol = o.rmse_tol;
    cfg.rmse_rel_tol = o.rmse_rel_tol;
    cfg.mirror = !o.no_mirror;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto source = pcd::read_file(o.source);
    const auto target = pcd::read_file(o.target);
    const auto report = register_clouds(source, target, cfg);

    print_matrix(out, report.final_transform.homogeneous());
    out << "rmse " << fmt17(report.final_rmse()) << '\n';

    if (!o.json_path.empty()) {
        nlohmann::json j{{"method", std::string(to_string(cfg.method))},
                         {"sigma", cfg.sigma},
                         {"iterations", report.iterations},
                         {"stop_reason", std::string(to_string(report.stop_reason))},
                         {"initial_rmse", report.initial_rmse},
                         {"final_rmse", report.final_rmse()},
                         {"rmse_trace", report.rmse_trace},
                         {"rank_trace", report.rank_trace},
                         {"degenerate_iterations", report.degenerate_iterations}};
        nlohmann::json m = nlohmann::json::array();
        const Matrix4 h = report.final_transform.homogeneous();
        for (int r = 0; r < 4; ++r) {
            m.push_back({h(r, 0), h(r, 1), h(r, 2), h(r, 3)});
        }
        j["transform"] = m;
        write_text(o.json_path, j.dump(2) + "\n");
    }
    if (report.iterations > 0 && report.degenerate_iterations == report.iterations) {
        err << "error: cross covariance was degenerate in every iteration\n";
        return kDegenerate;
    }
    return kSuccess;
}

int do_bench(const Options& o, const CLI::App& app, std::ostream& out) {
    ExperimentPlan plan;
    if (!o.plan_path.empty()) plan = parse_plan(read_text(o.plan_path));
    auto given = [&](const char* name) { return app.count(name) > 0; };
    try {
        if (given("--in")) plan.input = o.in;
        if (given("--runs")) plan.runs = o.runs;
        if (given("--methods")) {
            plan.methods.clear();
            for (const auto& m : o.methods) plan.methods.push_back(method_flag(m));
        }
        if (given("--sigmas")) plan.sigmas = o.sigmas;
        if (given("--outliers")) {
            plan.outlier_fractions.clear();
            if (o.outliers == "sweep") {
                plan.outlier_fractions = ExperimentPlan::outlier_sweep_preset();
            } else {
                std::istringstream in(o.outliers);
                std::string item;
                while (std::getline(in, item, ',')) plan.outlier_fractions.push_back(std::stod(item));
            }
        }
        if (given("--offset-std")) plan.outlier_offset_std = o.offset_std;
        if (given("--sampler")) plan.sampler.mode = sampler_flag(o.sampler);
        if (given("--angle-bound")) plan.sampler.angle_bound = o.bounds.angle_bound;
        if (given("--trans-bound")) plan.sampler.trans_bound = o.bounds.trans_bound;
        if (given("--angle-std")) plan.sampler.angle_std = o.bounds.angle_std;
        if (given("--trans-std")) plan.sampler.trans_std = o.bounds.trans_std;
        if (given("--iters")) plan.iterations = o.iters;
        if (given("--seed")) plan.master_seed = o.seed;
        if (given("--leaf")) plan.voxel_leaf = o.leaf_bench;
        if (given("--no-mirror")) plan.mirror = false;
        if (given("--threads")) plan.threads = o.threads;
        plan.validate();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (plan.input.empty()) throw UsageError("bench needs an input cloud (--in or the plan's input key)");

    const auto records = run_plan(plan);
    const auto summary = aggregate(records);
    const auto format = o.format == "json" ? ExportFormat::Json : ExportFormat::Csv;
    const auto text = export_records(records, summary, format, !o.no_timing);
    if (o.out.empty() || o.out == "-") {
        out << text;
    } else {
        write_text(o.out, text);
        out << format_summary(summary);
    }
    return kSuccess;
}

int do_info(const Options& o, std::ostream& out) {
    const auto [header, cloud] = pcd::read_file_with_header(o.in);
    out << "points " << cloud.size() << '\n';
    out << "fields";
    for (const auto& f : header.fields) out << ' ' << f.name;
    out << '\n';
    const auto box = bounding_box(cloud);
    out << "min " << fmt17(box.min.x()) << ' ' << fmt17(box.min.y()) << ' ' << fmt17(box.min.z()) << '\n';
    out << "max " << fmt17(box.max.x()) << ' ' << fmt17(box.max.y()) << ' ' << fmt17(box.max.z()) << '\n';
    out << "diagonal " << fmt17(box.diagonal()) << '\n';
    return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Correntropy-weighted ICP point cloud registration toolkit", "cosm"};
    app.require_subcommand(1);
    Options o;

    auto* downsample = app.add_subcommand("downsample", "Voxel grid filter a PCD file");
    downsample->add_option("--in", o.in, "Input PCD")->required();
    downsample->add_option("--out", o.out, "Output PCD")->required();
    downsample->add_option("--leaf", o.leaf, "Voxel edge length")->required();

    auto* gen = app.add_subcommand("gen-transform", "Sample random rigid poses");
    gen->add_option("--seed", o.seed, "RNG seed")->required();
    gen->add_option("--sampler", o.sampler, "uniform or gaussian")->capture_default_str();
    gen->add_option("--angle-bound", o.bounds.angle_bound, "Uniform angle bound (rad)")->capture_default_str();
    gen->add_option("--trans-bound", o.bounds.trans_bound, "Uniform translation bound")->capture_default_str();
    gen->add_option("--angle-std", o.bounds.angle_std, "Gaussian angle std (rad)")->capture_default_str();
    gen->add_option("--trans-std", o.bounds.trans_std, "Gaussian translation std")->capture_default_str();
    gen->add_option("--count", o.count, "Number of poses")->capture_default_str();
    gen->add_flag("--matrix", o.as_matrix, "Print 4x4 matrices instead of roll pitch yaw tx ty tz");

    auto* transform = app.add_subcommand("transform", "Apply a rigid pose to a PCD file");
    transform->add_option("--in", o.in, "Input PCD")->required();
    transform->add_option("--out", o.out, "Output PCD")->required();
    transform->add_option("--pose", o.pose, "roll pitch yaw tx ty tz")->required()->expected(6)->delimiter(',');

    auto* inject = app.add_subcommand("inject", "Displace a fraction of points as shot noise");
    inject->add_option("--in", o.in, "Input PCD")->required();
    inject->add_option("--out", o.out, "Output PCD")->required();
    inject->add_option("--fraction", o.fraction, "Fraction of points in [0, 1]")->required();
    inject->add_option("--seed", o.seed, "RNG seed")->required();
    auto* offset_opt = inject->add_option("--offset-std", o.offset_std, "Per-axis offset std (default: half diagonal)");

    auto* reg = app.add_subcommand("register", "Register a source cloud onto a target cloud");
    reg->add_option("--source", o.source, "Source PCD")->required();
    reg->add_option("--target", o.target, "Target PCD")->required();
    reg->add_option("--method", o.method, "cosm or svd")->capture_default_str();
    reg->add_option("--sigma", o.sigma, "Kernel bandwidth")->capture_default_str();
    reg->add_option("--iters", o.iters, "Maximum iterations")->capture_default_str();
    reg->add_option("--rmse-tol", o.rmse_tol, "Stop once RMSE falls below this");
    reg->add_option("--rmse-rel-tol", o.rmse_rel_tol, "Stop once the relative RMSE change falls below this");
    reg->add_flag("--no-mirror", o.no_mirror, "Skip the mirrored similarity cells");
    reg->add_option("--json", o.json_path, "Write a JSON report");

    auto* bench = app.add_subcommand("bench", "Run a seeded benchmark plan");
    bench->add_option("--plan", o.plan_path, "Plan file (key = value or JSON)");
    bench->add_option("--in", o.in, "Input PCD");
    bench->add_option("--runs", o.runs, "Number of runs");
    bench->add_option("--methods", o.methods, "Methods")->delimiter(',');
    bench->add_option("--sigmas", o.sigmas, "Kernel bandwidths")->delimiter(',');
    bench->add_option("--outliers", o.outliers, "Outlier fractions (comma list) or 'sweep'");
    bench->add_option("--offset-std", o.offset_std, "Outlier offset std");
    bench->add_option("--sampler", o.sampler, "uniform or gaussian");
    bench->add_option("--angle-bound", o.bounds.angle_bound, "Uniform angle bound (rad)");
    bench->add_option("--trans-bound", o.bounds.trans_bound, "Uniform translation bound");
    bench->add_option("--angle-std", o.bounds.angle_std, "Gaussian angle std (rad)");
    bench->add_option("--trans-std", o.bounds.trans_std, "Gaussian translation std");
    bench->add_option("--iters", o.iters, "Iterations per run");
    bench->add_option("--seed", o.seed, "Master seed");
    bench->add_option("--leaf", o.leaf_bench, "Voxel leaf applied to the input");
    bench->add_flag("--no-mirror", o.no_mirror, "Skip the mirrored similarity cells");
    bench->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    bench->add_option("--out", o.out, "Output file ('-' for standard output)");
    bench->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    bench->add_flag("--no-timing", o.no_timing, "Write wall_ms as 0 for reproducible output");

    auto* info = app.add_subcommand("info", "Describe a PCD file");
    info->add_option("--in", o.in, "Input PCD")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*downsample) return do_downsample(o, out);
        if (*gen) return do_gen_transform(o, out);
        if (*transform) return do_transform(o, out);
        if (*inject) return do_inject(o, out, offset_opt->count() > 0);
        if (*reg) return do_register(o, out, err);
        if (*bench) return do_bench(o, *bench, out);
        if (*info) return do_info(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NonPositiveLeaf& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const pcd::PcdError& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    } catch (const pcd::InputUnreadable& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    }
    return kUsage;
}

}  // namespace cosm::cli
