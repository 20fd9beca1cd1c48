#include "fal/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fal/config.hpp"
#include "fal/metrics.hpp"
#include "fal/verification.hpp"

namespace fal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void prepare_out(const std::string& out) {
    if (out.empty()) throw ConfigError("config: no output directory (set \"out\" or pass --out)");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create " + out + ": " + ec.message());
}

template <typename T>
void set_if(T& target, const std::optional<T>& v) {
    if (v) target = *v;
}

StudyReport run_study(const VerifyOptions& o) {
    if (o.study == "uniform-approx") {
        UniformApproxOptions u;
        set_if(u.m_grid, o.m_grid);
        set_if(u.seeds, o.seeds);
        set_if(u.seed, o.seed);
        set_if(u.n_samples, o.samples);
        return uniform_approx_study(u);
    }
    if (o.study == "coupling") {
        CouplingOptions c;
        set_if(c.m_grid, o.m_grid);
        set_if(c.seeds, o.seeds);
        set_if(c.seed, o.seed);
        set_if(c.delta, o.delta);
        return coupling_study(c);
    }
    if (o.study == "fl-gap") {
        FlGapOptions f;
        set_if(f.m_grid, o.m_grid);
        set_if(f.local_steps, o.local_steps);
        set_if(f.rounds, o.rounds);
        set_if(f.seed, o.seed);
        set_if(f.rho, o.rho);
        set_if(f.delta, o.delta);
        return fl_gap_study(f);
    }
    if (o.study == "finite-diff") {
        FiniteDiffOptions f;
        set_if(f.m, o.width);
        set_if(f.seeds, o.seeds);
        set_if(f.seed, o.seed);
        return finite_diff_study(f);
    }
    if (o.study == "convergence") {
        ConvergenceOptions c;
        set_if(c.m, o.width);
        set_if(c.local_steps, o.local_steps);
        set_if(c.rounds, o.rounds);
        set_if(c.seed, o.seed);
        set_if(c.rho, o.rho);
        set_if(c.delta, o.delta);
        return convergence_study(c);
    }
    throw ConfigError("unknown study '" + o.study + "'");
}

}  // namespace

int cmd_run(const RunOptions& opt, Algorithm algo, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    LoadedData data;
    try {
        const std::string text = opt.config_path.empty() ? std::string("{}") : read_file(opt.config_path);
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error&) {
            parse_config(text);  // throws with a line number
        }
        if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
        if (!opt.preset.empty()) doc["preset"] = opt.preset;
        if (!opt.out.empty()) doc["out"] = opt.out;
        apply_overrides(doc, opt.overrides);
        cfg = resolve_config(doc, text);
        data = build_data(cfg.data, cfg.fal.adversary.rho);
        validate(cfg.fal, data.train);
        prepare_out(cfg.out);
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }

    try {
        const fs::path out(cfg.out);
        write_text(out / "resolved_config.json", to_json(cfg).dump(2) + "\n");
        const RunResult res = run(algo, cfg.fal, data.train, data.test);
        write_text(out / "metrics.csv", metrics_csv(res.records, cfg.fal.grad_audit_every > 0));
        const std::string name = algo == Algorithm::Fal ? "FAL" : "FedAvg";
        const std::string title = name + (cfg.preset.empty() ? "" : " (" + cfg.preset + ")");
        write_text(out / "curves.svg", curves_svg(res.records, title));
        log << name << ": " << res.records.size() << " rounds";
        if (!res.records.empty()) {
            const auto& last = res.records.back();
            log << ", last adv_loss " << format_double(last.adv_loss) << ", train_acc "
                << format_double(last.train_acc);
        }
        log << " -> " << out.string() << '\n';
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

const std::vector<std::string>& study_names() {
    static const std::vector<std::string> names{"uniform-approx", "coupling", "fl-gap", "finite-diff",
                                                "convergence"};
    return names;
}

int cmd_verify(const VerifyOptions& opt, std::ostream& log, std::ostream& err) {
    bool known = false;
    for (const auto& n : study_names()) known = known || n == opt.study;
    if (!known) {
        err << "unknown study '" << opt.study << "' (expected uniform-approx, coupling, fl-gap, finite-diff, "
            << "convergence)\n";
        return kExitConfig;
    }
    try {
        prepare_out(opt.out);
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }
    StudyReport rep;
    try {
        rep = run_study(opt);
    } catch (const std::invalid_argument& e) {
        err << "verify " << opt.study << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "verify " << opt.study << " failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    try {
        const fs::path out(opt.out);
        write_text(out / (opt.study + ".csv"), rep.csv());
        write_text(out / (opt.study + ".json"), rep.json().dump(2) + "\n");
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitRuntime;
    }
    for (const auto& c : rep.checks)
        log << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << '\n';
    log << opt.study << ": " << (rep.passed() ? "pass" : "fail") << '\n';
    return rep.passed() ? kExitOk : kExitConfig;
}

int cmd_gen_data(const GenDataOptions& opt, std::ostream& log, std::ostream& err) {
    LoadedData data;
    double rho = 0.0;
    try {
        DataSpec spec;
        spec.seed = opt.seed;
        if (opt.kind == "sphere") {
            if (!(opt.delta > 0.0 && opt.delta <= 0.5))
                throw ConfigError("gen-data: delta must be in (0, 1/2] for manifold data");
            if (!(opt.rho >= 0.0 && opt.rho < 0.5)) throw ConfigError("gen-data: rho must be in [0, 1/2)");
            spec.kind = DataKind::Sphere;
            spec.clients = opt.n_clients;
            spec.per_client = opt.per_client;
            spec.dim = opt.d;
            spec.delta = opt.delta;
            rho = opt.rho;
        } else if (opt.kind == "clusters") {
            spec.kind = DataKind::Clusters;
            spec.clients = opt.clusters_clients;
            spec.dim = 2;
            spec.clusters.scale = opt.scale;
            spec.clusters.flip_rate = opt.flip_rate;
            spec.clusters.shard_by_cluster = opt.shard_by_cluster;
            if (opt.scaling == "means") spec.clusters.scaling = ClusterScaling::Means;
            else if (opt.scaling == "features") spec.clusters.scaling = ClusterScaling::Features;
            else throw ConfigError("gen-data: unknown scaling '" + opt.scaling + "'");
        } else {
            throw ConfigError("gen-data: unknown kind '" + opt.kind + "' (expected sphere, clusters)");
        }
        data = build_data(spec, rho);
        prepare_out(opt.out);
    } catch (const std::invalid_argument& e) {
        err << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "gen-data failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    try {
        const fs::path out(opt.out);
        save_csv(data.train, out / "train.csv");
        if (!data.test.empty()) save_csv(data.test, out / "test.csv");
        const SeparabilityStats s = separability_stats(data.train, rho);
        log << "train " << data.train.total_points() << " rows";
        if (!data.test.empty()) log << ", test " << data.test.size() << " rows";
        log << "; delta_min=" << format_double(s.delta_min) << " gamma_bound=" << format_double(s.gamma_bound)
            << " rho=" << format_double(rho) << '\n';
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace fal
