#include "enprune/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace enprune {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line, section;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) + " of '" + path +
                                     "' is not 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        out[(section.empty() ? key : section + "." + key)] = value;
    }
    return out;
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& values) {
    for (const auto& [key, v] : values) {
        if (key == "run.arch") cfg.arch = v;
        else if (key == "run.data_dir") cfg.data_dir = v;
        else if (key == "run.out") cfg.out_dir = v;
        else if (key == "run.run_name") cfg.run_name = v;
        else if (key == "run.seed") cfg.seed = std::stoull(v);
        else if (key == "run.checkpoint") cfg.checkpoint = v;
        else if (key == "run.plan") cfg.plan_file = v;
        else if (key == "run.train_size") cfg.train_size = std::stoll(v);
        else if (key == "run.test_size") cfg.test_size = std::stoll(v);
        else if (key == "run.mini_val_size") cfg.mini_val_size = std::stoll(v);
        else if (key == "run.report_samples") cfg.report_samples = std::stoll(v);
        else if (key == "search.flops_target") cfg.search.flops_target = std::stod(v);
        else if (key == "search.reward") cfg.search.reward = reward_kind_from_name(v);
        else if (key == "search.entropy_maximize") cfg.search.entropy_maximize = parse_bool(v, key);
        else if (key == "search.episodes") cfg.search.episodes = std::stoll(v);
        else if (key == "search.a_max") cfg.search.a_max = std::stod(v);
        else if (key == "search.bins") cfg.search.bins = std::stoll(v);
        else if (key == "search.calibration_samples") cfg.search.calibration_samples = std::stoll(v);
        else if (key == "search.calibration_positions") cfg.search.calibration_positions = std::stoll(v);
        else if (key == "search.warmup_episodes") cfg.search.warmup_episodes = std::stoll(v);
        else if (key == "search.sigma0") cfg.search.sigma0 = std::stod(v);
        else if (key == "search.noise_decay") cfg.search.noise_decay = std::stod(v);
        else if (key == "search.ridge") cfg.search.ridge = std::stod(v);
        else if (key == "agent.batch") cfg.search.agent_batch = std::stoll(v);
        else if (key == "agent.tau") cfg.search.tau = std::stod(v);
        else if (key == "agent.baseline_decay") cfg.search.baseline_decay = std::stod(v);
        else if (key == "agent.actor_lr") cfg.search.actor_lr = std::stod(v);
        else if (key == "agent.critic_lr") cfg.search.critic_lr = std::stod(v);
        else if (key == "agent.buffer") cfg.search.buffer_capacity = std::stoll(v);
        else if (key == "train.epochs") cfg.train.epochs = std::stoll(v);
        else if (key == "train.lr0") cfg.train.lr0 = std::stod(v);
        else if (key == "train.momentum") cfg.train.momentum = std::stod(v);
        else if (key == "train.batch_size") cfg.train.batch_size = std::stoll(v);
        else if (key == "train.augment") cfg.train.augment = parse_bool(v, key);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

void Manifest::add(const std::string& key, const std::string& value) {
    rows.emplace_back(key, value);
}
void Manifest::add(const std::string& key, int64_t value) {
    rows.emplace_back(key, std::to_string(value));
}
void Manifest::add(const std::string& key, uint64_t value) {
    rows.emplace_back(key, std::to_string(value));
}
void Manifest::add(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    rows.emplace_back(key, buf);
}

void Manifest::write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot open '" + path + "'");
    for (const auto& [k, v] : rows) os << k << " = " << v << "\n";
}

Manifest manifest_for(const RunConfig& cfg) {
    Manifest m;
    m.add("command", cfg.command);
    m.add("version", std::string(kVersion));
    m.add("seed", cfg.seed);
    m.add("run.arch", cfg.arch);
    m.add("run.data_dir", cfg.data_dir);
    m.add("run.checkpoint", cfg.checkpoint);
    m.add("run.plan", cfg.plan_file);
    m.add("run.train_size", cfg.train_size);
    m.add("run.test_size", cfg.test_size);
    m.add("run.mini_val_size", cfg.mini_val_size);
    m.add("run.report_samples", cfg.report_samples);
    m.add("search.flops_target", cfg.search.flops_target);
    m.add("search.reward", reward_kind_name(cfg.search.reward));
    m.add("search.entropy_maximize", std::string(cfg.search.entropy_maximize ? "true" : "false"));
    m.add("search.episodes", cfg.search.episodes);
    m.add("search.a_max", cfg.search.a_max);
    m.add("search.bins", cfg.search.bins);
    m.add("search.calibration_samples", cfg.search.calibration_samples);
    m.add("search.calibration_positions", cfg.search.calibration_positions);
    m.add("search.warmup_episodes", cfg.search.warmup_episodes);
    m.add("search.sigma0", cfg.search.sigma0);
    m.add("search.noise_decay", cfg.search.noise_decay);
    m.add("search.ridge", cfg.search.ridge);
    m.add("agent.batch", cfg.search.agent_batch);
    m.add("agent.tau", cfg.search.tau);
    m.add("agent.baseline_decay", cfg.search.baseline_decay);
    m.add("agent.actor_lr", cfg.search.actor_lr);
    m.add("agent.critic_lr", cfg.search.critic_lr);
    m.add("agent.buffer", cfg.search.buffer_capacity);
    m.add("train.epochs", cfg.train.epochs);
    m.add("train.lr0", cfg.train.lr0);
    m.add("train.momentum", cfg.train.momentum);
    m.add("train.batch_size", cfg.train.batch_size);
    m.add("train.augment", std::string(cfg.train.augment ? "true" : "false"));
    return m;
}

}  // namespace enprune
