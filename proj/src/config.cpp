#include "fal/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fal {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDataStream = 7;

std::string join(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out;
}

/// Line of the first occurrence of the quoted path components, in order.
std::size_t line_of(const std::string& source, const std::vector<std::string>& path) {
    if (source.empty()) return 0;
    std::size_t pos = 0;
    for (const auto& key : path) {
        pos = source.find("\"" + key + "\"", pos);
        if (pos == std::string::npos) return 0;
    }
    return 1 + static_cast<std::size_t>(std::count(source.begin(), source.begin() + static_cast<long>(pos), '\n'));
}

std::string with_line(const std::string& msg, std::size_t line) {
    return line == 0 ? "config: " + msg : "config line " + std::to_string(line) + ": " + msg;
}

class Reader {
public:
    explicit Reader(const std::string& source) : source_(source) {}

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
        const std::size_t line = line_of(source_, path);
        throw ConfigError(with_line(msg, line), line);
    }

    std::size_t size(const json& v, const std::vector<std::string>& path) const {
        if (v.is_number_unsigned()) return v.get<std::size_t>();
        if (v.is_number_integer()) {
            if (v.get<long long>() < 0) fail(path, "'" + join(path) + "' must be >= 0");
            return static_cast<std::size_t>(v.get<long long>());
        }
        fail(path, "'" + join(path) + "' must be a non-negative integer");
    }

    std::uint64_t u64(const json& v, const std::vector<std::string>& path) const {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        return size(v, path);
    }

    double number(const json& v, const std::vector<std::string>& path) const {
        if (!v.is_number()) fail(path, "'" + join(path) + "' must be a number");
        return v.get<double>();
    }

    bool boolean(const json& v, const std::vector<std::string>& path) const {
        if (!v.is_boolean()) fail(path, "'" + join(path) + "' must be true or false");
        return v.get<bool>();
    }

    std::string string(const json& v, const std::vector<std::string>& path) const {
        if (!v.is_string()) fail(path, "'" + join(path) + "' must be a string");
        return v.get<std::string>();
    }

    template <typename F>
    auto parse_enum(const json& v, const std::vector<std::string>& path, F&& from_string) const {
        const std::string s = string(v, path);
        try {
            return from_string(s);
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }

    const json& object(const json& v, const std::vector<std::string>& path) const {
        if (!v.is_object()) fail(path, "'" + join(path) + "' must be an object");
        return v;
    }

private:
    const std::string& source_;
};

using Setter = std::function<void(const Reader&, const json&, const std::vector<std::string>&)>;

void apply_object(const Reader& rd, const json& obj, const std::vector<std::string>& prefix,
                  const std::map<std::string, Setter>& setters) {
    rd.object(obj, prefix);
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        std::vector<std::string> path = prefix;
        path.push_back(it.key());
        auto s = setters.find(it.key());
        if (s == setters.end()) rd.fail(path, "unknown key '" + join(path) + "'");
        s->second(rd, it.value(), path);
    }
}

DataKind data_kind_from_string(const std::string& s) {
    if (s == "sphere") return DataKind::Sphere;
    if (s == "clusters") return DataKind::Clusters;
    if (s == "csv") return DataKind::Csv;
    throw std::invalid_argument("unknown data kind '" + s + "' (expected sphere, clusters, csv)");
}

std::string to_string(DataKind k) {
    switch (k) {
        case DataKind::Sphere: return "sphere";
        case DataKind::Clusters: return "clusters";
        case DataKind::Csv: return "csv";
    }
    return "unknown";
}

ClusterScaling scaling_from_string(const std::string& s) {
    if (s == "means") return ClusterScaling::Means;
    if (s == "features") return ClusterScaling::Features;
    throw std::invalid_argument("unknown cluster scaling '" + s + "' (expected means, features)");
}

std::string to_string(ClusterScaling s) { return s == ClusterScaling::Means ? "means" : "features"; }

LossKind loss_from_string(const std::string& s) {
    if (s == "absolute") return LossKind::Absolute;
    throw std::invalid_argument("unknown loss '" + s + "' (expected absolute)");
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    cfg.preset = name;
    if (name.empty()) return cfg;
    if (name == "theory") {
        cfg.data.kind = DataKind::Sphere;
        cfg.fal = theory_preset(cfg.data.clients, cfg.data.per_client, 1024, 2, 0.05, 100);
        return cfg;
    }
    if (name == "experiment6") {
        cfg.data.kind = DataKind::Clusters;
        cfg.data.clients = 4;
        cfg.data.dim = 2;
        cfg.data.clusters.scale = 2.5;
        FalConfig& f = cfg.fal;
        f.width = 128;
        f.local_steps = 100;
        f.rounds = 100;
        f.eta_local = 1e-5;
        f.eta_global = 1.0;
        f.adversary.mode = AdversaryMode::LinfBox;
        f.adversary.rho = 0.0314;
        f.adversary.steps = 7;
        f.adversary.step_size = 0.00784;
        f.batch_size = 50;
        f.reduction = Reduction::Sum;
        f.theory = false;
        return cfg;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected theory, experiment6)");
}

}  // namespace

ConfigError::ConfigError(const std::string& msg, std::size_t line) : std::runtime_error(msg), line_(line) {}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"theory", "experiment6"};
    return names;
}

RunConfig resolve_config(const json& doc, const std::string& source) {
    const Reader rd(source);
    rd.object(doc, {});
    std::string preset;
    if (doc.contains("preset")) preset = rd.string(doc["preset"], {"preset"});
    RunConfig cfg;
    try {
        cfg = preset_config(preset);
    } catch (const std::invalid_argument& e) {
        rd.fail({"preset"}, e.what());
    }
    FalConfig& f = cfg.fal;
    AdversaryConfig& a = f.adversary;
    DataSpec& d = cfg.data;
    ClusterConfig& cc = d.clusters;

    const std::map<std::string, Setter> adversary_keys{
        {"mode", [&](auto& r, auto& v, auto& p) { a.mode = r.parse_enum(v, p, adversary_mode_from_string); }},
        {"rho", [&](auto& r, auto& v, auto& p) { a.rho = r.number(v, p); }},
        {"steps", [&](auto& r, auto& v, auto& p) { a.steps = r.size(v, p); }},
        {"step_size", [&](auto& r, auto& v, auto& p) { a.step_size = r.number(v, p); }},
        {"restarts", [&](auto& r, auto& v, auto& p) { a.restarts = r.size(v, p); }},
        {"grid_resolution", [&](auto& r, auto& v, auto& p) { a.grid_resolution = r.size(v, p); }},
    };
    const std::map<std::string, Setter> data_keys{
        {"kind", [&](auto& r, auto& v, auto& p) { d.kind = r.parse_enum(v, p, data_kind_from_string); }},
        {"clients", [&](auto& r, auto& v, auto& p) { d.clients = r.size(v, p); }},
        {"per_client", [&](auto& r, auto& v, auto& p) { d.per_client = r.size(v, p); }},
        {"dim", [&](auto& r, auto& v, auto& p) { d.dim = r.size(v, p); }},
        {"delta", [&](auto& r, auto& v, auto& p) { d.delta = r.number(v, p); }},
        {"scale", [&](auto& r, auto& v, auto& p) { cc.scale = r.number(v, p); }},
        {"per_class_train", [&](auto& r, auto& v, auto& p) { cc.per_class_train = r.size(v, p); }},
        {"per_class_test", [&](auto& r, auto& v, auto& p) { cc.per_class_test = r.size(v, p); }},
        {"flip_rate", [&](auto& r, auto& v, auto& p) { cc.flip_rate = r.number(v, p); }},
        {"shard_by_cluster", [&](auto& r, auto& v, auto& p) { cc.shard_by_cluster = r.boolean(v, p); }},
        {"scaling", [&](auto& r, auto& v, auto& p) { cc.scaling = r.parse_enum(v, p, scaling_from_string); }},
        {"means",
         [&](auto& r, auto& v, auto& p) {
             if (!v.is_array() || v.size() != 4) r.fail(p, "'data.means' must hold 4 [x, y] pairs");
             for (std::size_t i = 0; i < 4; ++i) {
                 if (!v[i].is_array() || v[i].size() != 2) r.fail(p, "'data.means' must hold 4 [x, y] pairs");
                 cc.means[i] = {r.number(v[i][0], p), r.number(v[i][1], p)};
             }
         }},
        {"train_path", [&](auto& r, auto& v, auto& p) { d.train_path = r.string(v, p); }},
        {"test_path", [&](auto& r, auto& v, auto& p) { d.test_path = r.string(v, p); }},
        {"seed", [&](auto& r, auto& v, auto& p) { d.seed = r.u64(v, p); }},
    };
    const std::map<std::string, Setter> top_keys{
        {"preset", [](auto&, auto&, auto&) {}},
        {"out", [&](auto& r, auto& v, auto& p) { cfg.out = r.string(v, p); }},
        {"seed", [&](auto& r, auto& v, auto& p) { f.seed = r.u64(v, p); }},
        {"width", [&](auto& r, auto& v, auto& p) { f.width = r.size(v, p); }},
        {"local_steps", [&](auto& r, auto& v, auto& p) { f.local_steps = r.size(v, p); }},
        {"rounds", [&](auto& r, auto& v, auto& p) { f.rounds = r.size(v, p); }},
        {"eta_local", [&](auto& r, auto& v, auto& p) { f.eta_local = r.number(v, p); }},
        {"eta_global", [&](auto& r, auto& v, auto& p) { f.eta_global = r.number(v, p); }},
        {"loss", [&](auto& r, auto& v, auto& p) { f.loss = r.parse_enum(v, p, loss_from_string); }},
        {"batch_size", [&](auto& r, auto& v, auto& p) { f.batch_size = r.size(v, p); }},
        {"reduction", [&](auto& r, auto& v, auto& p) { f.reduction = r.parse_enum(v, p, reduction_from_string); }},
        {"parallel_clients", [&](auto& r, auto& v, auto& p) { f.parallel_clients = r.boolean(v, p); }},
        {"grad_audit_every", [&](auto& r, auto& v, auto& p) { f.grad_audit_every = r.size(v, p); }},
        {"accumulate_adv_set", [&](auto& r, auto& v, auto& p) { f.accumulate_adv_set = r.boolean(v, p); }},
        {"theory", [&](auto& r, auto& v, auto& p) { f.theory = r.boolean(v, p); }},
        {"adversary", [&](auto& r, auto& v, auto& p) { apply_object(r, v, p, adversary_keys); }},
        {"data", [&](auto& r, auto& v, auto& p) { apply_object(r, v, p, data_keys); }},
    };
    apply_object(rd, doc, {}, top_keys);

    // Theory defaults that depend on other keys, unless set explicitly.
    if (preset == "theory") {
        if (!doc.contains("eta_local") && f.local_steps > 0) f.eta_local = 1.0 / static_cast<double>(f.local_steps);
        const bool has_eta_global = doc.contains("eta_global");
        if (!has_eta_global && d.clients * d.per_client > 0)
            f.eta_global = 0.5 / static_cast<double>(d.clients * d.per_client);
        const bool has_step = doc.contains("adversary") && doc["adversary"].contains("step_size");
        if (!has_step) a.step_size = a.rho / 4.0;
    }
    a.loss = f.loss;

    if (d.kind == DataKind::Csv && d.train_path.empty()) rd.fail({"data"}, "data.kind 'csv' needs data.train_path");
    if (d.kind == DataKind::Clusters && d.dim != 2) rd.fail({"data", "dim"}, "cluster data is two-dimensional");
    return cfg;
}

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line =
            1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
        throw ConfigError(with_line("invalid JSON", line), line);
    }
    return resolve_config(doc, text);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_overrides(json& doc, const std::vector<std::string>& assignments) {
    if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("config: override '" + a + "' is not key=value");
        const std::string key = a.substr(0, eq);
        const std::string raw = a.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;
        }
        json* node = &doc;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw ConfigError("config: override key '" + key + "' is malformed");
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            json& child = (*node)[part];
            if (child.is_null()) child = json::object();
            if (!child.is_object()) throw ConfigError("config: '" + key.substr(0, dot) + "' is not an object");
            node = &child;
            start = dot + 1;
        }
    }
}

ordered_json to_json(const RunConfig& cfg) {
    const FalConfig& f = cfg.fal;
    const AdversaryConfig& a = f.adversary;
    const DataSpec& d = cfg.data;
    const ClusterConfig& cc = d.clusters;
    ordered_json j;
    j["preset"] = cfg.preset;
    j["out"] = cfg.out;
    j["seed"] = f.seed;
    j["width"] = f.width;
    j["local_steps"] = f.local_steps;
    j["rounds"] = f.rounds;
    j["eta_local"] = f.eta_local;
    j["eta_global"] = f.eta_global;
    j["loss"] = "absolute";
    j["batch_size"] = f.batch_size;
    j["reduction"] = to_string(f.reduction);
    j["parallel_clients"] = f.parallel_clients;
    j["grad_audit_every"] = f.grad_audit_every;
    j["accumulate_adv_set"] = f.accumulate_adv_set;
    j["theory"] = f.theory;
    j["adversary"] = {{"mode", to_string(a.mode)},       {"rho", a.rho},
                      {"steps", a.steps},                {"step_size", a.step_size},
                      {"restarts", a.restarts},          {"grid_resolution", a.grid_resolution}};
    ordered_json means = ordered_json::array();
    for (const auto& m : cc.means) means.push_back({m[0], m[1]});
    j["data"] = {{"kind", to_string(d.kind)},
                 {"clients", d.clients},
                 {"per_client", d.per_client},
                 {"dim", d.dim},
                 {"delta", d.delta},
                 {"scale", cc.scale},
                 {"per_class_train", cc.per_class_train},
                 {"per_class_test", cc.per_class_test},
                 {"flip_rate", cc.flip_rate},
                 {"shard_by_cluster", cc.shard_by_cluster},
                 {"scaling", to_string(cc.scaling)},
                 {"means", means},
                 {"train_path", d.train_path},
                 {"test_path", d.test_path},
                 {"seed", d.seed}};
    return j;
}

LoadedData build_data(const DataSpec& spec, double rho) {
    LoadedData out;
    RngStream rng(spec.seed, kDataStream);
    switch (spec.kind) {
        case DataKind::Sphere:
            out.train = gen_separable_sphere(spec.clients, spec.per_client, spec.dim, spec.delta, rng, rho);
            break;
        case DataKind::Clusters: {
            ClusterData cd = gen_gaussian_clusters(spec.clusters, spec.clients, rng);
            out.train = std::move(cd.train);
            out.test = std::move(cd.test);
            break;
        }
        case DataKind::Csv:
            out.train = load_csv(spec.train_path);
            if (!spec.test_path.empty()) out.test = load_csv(spec.test_path).flatten();
            break;
    }
    return out;
}

}  // namespace fal
