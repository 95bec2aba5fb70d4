#include "eqprune/experiment.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace eqprune {
namespace {

constexpr std::array<std::string_view, 19> kKeys{
    "name",         "epochs",       "batch_size",    "lr_theta",       "seed",
    "alpha",        "beta",         "gamma",         "eta",            "lr_s",
    "epsilon",      "benefit_mode", "benefit_gradient", "s_update_every", "train_images",
    "train_labels", "test_images",  "test_labels",   "out"};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size())
        throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not a number");
    return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size())
        throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not a non-negative integer");
    return out;
}

std::filesystem::path first_existing(const std::filesystem::path& dir, const char* name) {
    const auto plain = dir / name;
    if (std::filesystem::exists(plain)) return plain;
    auto gz = plain;
    gz += ".gz";
    return std::filesystem::exists(gz) ? gz : plain;
}

} // namespace

std::span<const std::string_view> config_keys() { return kKeys; }

void apply_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    auto& t = cfg.train;
    auto& g = t.game;
    try {
        if (key == "name") {
            if (value.empty() || value.find('/') != std::string_view::npos)
                throw ConfigError("name: must be a non-empty single path component");
            cfg.name = value;
        } else if (key == "epochs") t.epochs = parse_unsigned(key, value);
        else if (key == "batch_size") t.batch_size = parse_unsigned(key, value);
        else if (key == "lr_theta") t.lr_theta = parse_double(key, value);
        else if (key == "seed") t.seed = parse_unsigned(key, value);
        else if (key == "alpha") g.alpha = parse_double(key, value);
        else if (key == "beta") g.beta = parse_double(key, value);
        else if (key == "gamma") g.gamma = parse_double(key, value);
        else if (key == "eta") g.eta = parse_double(key, value);
        else if (key == "lr_s") g.lr_s = parse_double(key, value);
        else if (key == "epsilon") g.epsilon = parse_double(key, value);
        else if (key == "benefit_mode") t.benefit_mode = parse_benefit_mode(value);
        else if (key == "benefit_gradient") t.benefit_gradient = parse_benefit_gradient(value);
        else if (key == "s_update_every") t.s_update_every = parse_unsigned(key, value);
        else if (key == "train_images") cfg.data.train_images = value;
        else if (key == "train_labels") cfg.data.train_labels = value;
        else if (key == "test_images") cfg.data.test_images = value;
        else if (key == "test_labels") cfg.data.test_labels = value;
        else if (key == "out") cfg.out = value;
        else throw ConfigError("unknown config key '" + std::string(key) + "'");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base, const std::string& origin) {
    const auto body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(origin + ": " + e.what());
        }
        const auto& fields = doc.contains("config") ? doc.at("config") : doc;
        if (!fields.is_object()) throw ConfigError(origin + ": expected a JSON object");
        for (const auto& [key, value] : fields.items()) {
            const std::string text_value = value.is_string() ? value.get<std::string>() : value.dump();
            try {
                apply_config_value(base, key, text_value);
            } catch (const ConfigError& e) {
                throw ConfigError(origin + ": " + e.what());
            }
        }
        return base;
    }

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        try {
            apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), std::move(base), path.string());
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    const auto& t = cfg.train;
    const auto& g = t.game;
    nlohmann::ordered_json j;
    j["name"] = cfg.name;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["lr_theta"] = t.lr_theta;
    j["seed"] = t.seed;
    j["alpha"] = g.alpha;
    j["beta"] = g.beta;
    j["gamma"] = g.gamma;
    j["eta"] = g.eta;
    j["lr_s"] = g.lr_s;
    j["epsilon"] = g.epsilon;
    j["benefit_mode"] = to_string(t.benefit_mode);
    j["benefit_gradient"] = to_string(t.benefit_gradient);
    j["s_update_every"] = t.s_update_every;
    j["train_images"] = cfg.data.train_images.string();
    j["train_labels"] = cfg.data.train_labels.string();
    j["test_images"] = cfg.data.test_images.string();
    j["test_labels"] = cfg.data.test_labels.string();
    j["out"] = cfg.out.string();
    return j;
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::string out;
    const auto doc = config_to_json(cfg);
    for (const auto& [key, value] : doc.items())
        out += key + " = " + (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
    return out;
}

DataPaths data_paths_in(const std::filesystem::path& dir) {
    return {first_existing(dir, "train-images-idx3-ubyte"), first_existing(dir, "train-labels-idx1-ubyte"),
            first_existing(dir, "t10k-images-idx3-ubyte"), first_existing(dir, "t10k-labels-idx1-ubyte")};
}

std::vector<ExperimentConfig> reference_configs() {
    struct Row {
        const char* name;
        double beta;
        double gamma;
    };
    constexpr Row rows[] = {
        {"very_high_beta", 0.1, 0.0},
        {"extreme_beta", 0.5, 0.0},
        {"l1_sparsity_strong", 0.001, 0.1},
        {"l1_l2_combined", 0.05, 0.05},
    };
    std::vector<ExperimentConfig> out;
    for (const auto& row : rows) {
        ExperimentConfig cfg;
        cfg.name = row.name;
        cfg.train.game.alpha = 1.0;
        cfg.train.game.beta = row.beta;
        cfg.train.game.gamma = row.gamma;
        cfg.train.game.lr_s = 0.001;
        out.push_back(cfg);
    }
    return out;
}

} // namespace eqprune
