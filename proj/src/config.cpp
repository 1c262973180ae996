#include "bayesg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace bayesg::harness {

namespace {

using EC = ExperimentConfig;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, p);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // keep it visibly a float
  return s;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <typename T>
T parse_number(const std::string& lit) {
  T v{};
  auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
  if (ec != std::errc() || p != lit.data() + lit.size())
    throw std::invalid_argument("expected a number, got \"" + lit + "\"");
  return v;
}

void parse(const std::string& lit, double& out) { out = parse_number<double>(lit); }
void parse(const std::string& lit, int& out) { out = parse_number<int>(lit); }
void parse(const std::string& lit, long long& out) { out = parse_number<long long>(lit); }
void parse(const std::string& lit, std::uint64_t& out) { out = parse_number<std::uint64_t>(lit); }
void parse(const std::string& lit, bool& out) {
  if (lit == "true")
    out = true;
  else if (lit == "false")
    out = false;
  else
    throw std::invalid_argument("expected true or false, got \"" + lit + "\"");
}
void parse(const std::string& lit, std::string& out) {
  if (lit.size() < 2 || lit.front() != '"' || lit.back() != '"')
    throw std::invalid_argument("expected a quoted string, got " + lit);
  out.clear();
  for (std::size_t i = 1; i + 1 < lit.size(); ++i) {
    if (lit[i] == '\\' && i + 2 < lit.size()) ++i;
    out += lit[i];
  }
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const EC&)> get;
  std::function<void(EC&, const std::string&)> set;
};

template <typename T, typename Access>
Field field(const char* section, const char* key, Access access) {
  return {section, key, [access](const EC& c) { return fmt(static_cast<T>(access(const_cast<EC&>(c)))); },
          [access](EC& c, const std::string& lit) {
            T v{};
            parse(lit, v);
            access(c) = v;
          }};
}

// Enum-like values stored as quoted strings.
template <typename Access, typename ToStr, typename FromStr>
Field named(const char* section, const char* key, Access access, ToStr to_str, FromStr from_str) {
  return {section, key, [=](const EC& c) { return fmt(std::string(to_str(access(const_cast<EC&>(c))))); },
          [=](EC& c, const std::string& lit) {
            std::string s;
            parse(lit, s);
            access(c) = from_str(s);
          }};
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out = "[";
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ", " : "") + std::to_string(seeds[i]);
  return out + "]";
}

std::vector<std::uint64_t> parse_seeds(const std::string& lit) {
  if (lit.size() < 2 || lit.front() != '[' || lit.back() != ']')
    throw std::invalid_argument("seeds must be a list like [1, 2, 3]");
  std::vector<std::uint64_t> out;
  std::stringstream ss(lit.substr(1, lit.size() - 2));
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_number<std::uint64_t>(tok));
  }
  return out;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(field<std::string>("env", "graph", [](EC& c) -> auto& { return c.graph; }));
    f.push_back(field<int>("env", "phases", [](EC& c) -> auto& { return c.env.phases; }));
    f.push_back(field<int>("env", "saturation_flow", [](EC& c) -> auto& { return c.env.saturation_flow; }));
    f.push_back(field<int>("env", "clearance_steps", [](EC& c) -> auto& { return c.env.clearance_steps; }));
    f.push_back(field<double>("env", "arrival_rate", [](EC& c) -> auto& { return c.env.arrival_rate; }));
    f.push_back(field<int>("env", "episode_length", [](EC& c) -> auto& { return c.env.episode_length; }));
    f.push_back(field<double>("env", "reward_scale", [](EC& c) -> auto& { return c.env.reward_scale; }));
    f.push_back(field<int>("env", "capacity", [](EC& c) -> auto& { return c.env.capacity; }));
    f.push_back(field<double>("env", "exit_weight", [](EC& c) -> auto& { return c.env.exit_weight; }));
    f.push_back(field<bool>("env", "peak_hour", [](EC& c) -> auto& { return c.env.peak_hour; }));
    f.push_back(field<double>("env", "peak_amplitude", [](EC& c) -> auto& { return c.env.peak_amplitude; }));
    f.push_back(field<int>("env", "initial_queue_max", [](EC& c) -> auto& { return c.env.initial_queue_max; }));
    f.push_back(field<double>("env", "queue_norm", [](EC& c) -> auto& { return c.env.queue_norm; }));
    f.push_back(field<double>("env", "age_norm", [](EC& c) -> auto& { return c.env.age_norm; }));
    f.push_back(field<std::uint64_t>("env", "routing_seed", [](EC& c) -> auto& { return c.env.routing_seed; }));

    f.push_back(named("train", "method", [](EC& c) -> auto& { return c.train.method; },
                      [](nn::Method m) { return nn::to_string(m); }, nn::method_from_string));
    f.push_back(field<double>("train", "gamma", [](EC& c) -> auto& { return c.train.gamma; }));
    f.push_back(field<double>("train", "alpha", [](EC& c) -> auto& { return c.train.alpha; }));
    f.push_back(field<double>("train", "beta", [](EC& c) -> auto& { return c.train.beta; }));
    f.push_back(named("train", "entropy", [](EC& c) -> auto& { return c.train.entropy; },
                      [](train::EntropyConvention e) { return train::to_string(e); },
                      train::entropy_convention_from_string));
    f.push_back(field<int>("train", "batch", [](EC& c) -> auto& { return c.train.batch; }));
    f.push_back(field<int>("train", "episodes", [](EC& c) -> auto& { return c.train.episodes; }));
    f.push_back(field<double>("train", "lr_actor", [](EC& c) -> auto& { return c.train.lr_actor; }));
    f.push_back(field<double>("train", "lr_critic", [](EC& c) -> auto& { return c.train.lr_critic; }));
    f.push_back(field<double>("train", "lr_graph", [](EC& c) -> auto& { return c.train.lr_graph; }));
    f.push_back(field<double>("train", "value_coef", [](EC& c) -> auto& { return c.train.value_coef; }));
    f.push_back(field<double>("train", "clip_norm", [](EC& c) -> auto& { return c.train.clip_norm; }));
    f.push_back(named("train", "optimizer", [](EC& c) -> auto& { return c.train.optimizer; },
                      [](ad::OptimizerKind k) { return ad::to_string(k); }, ad::optimizer_kind_from_string));
    f.push_back(field<int>("train", "embed", [](EC& c) -> auto& { return c.train.embed; }));
    f.push_back(field<int>("train", "hidden", [](EC& c) -> auto& { return c.train.hidden; }));
    f.push_back(field<int>("train", "critic_width", [](EC& c) -> auto& { return c.train.critic_width; }));
    f.push_back(field<int>("train", "gcn_layers", [](EC& c) -> auto& { return c.train.gcn_layers; }));

    f.push_back(named("mask", "mode", [](EC& c) -> auto& { return c.train.mask_mode; },
                      [](train::MaskMode m) { return train::to_string(m); }, train::mask_mode_from_string));
    f.push_back(named("mask", "features", [](EC& c) -> auto& { return c.train.mask_features; },
                      [](const mask::MaskFeatures& m) { return m.to_string(); }, mask::MaskFeatures::parse));
    f.push_back(named("mask", "logits", [](EC& c) -> auto& { return c.train.logit_mode; },
                      [](train::LogitMode m) { return train::to_string(m); }, train::logit_mode_from_string));
    f.push_back(field<double>("mask", "logit_init", [](EC& c) -> auto& { return c.train.logit_init; }));
    f.push_back(field<bool>("mask", "straight_through", [](EC& c) -> auto& { return c.train.straight_through; }));
    f.push_back(field<bool>("mask", "neighbor_edges", [](EC& c) -> auto& { return c.train.neighbor_edges; }));
    f.push_back(field<double>("mask", "retention", [](EC& c) -> auto& { return c.train.prior.retention; }));
    f.push_back(field<double>("mask", "tau_start", [](EC& c) -> auto& { return c.train.prior.tau_start; }));
    f.push_back(field<double>("mask", "tau_end", [](EC& c) -> auto& { return c.train.prior.tau_end; }));
    f.push_back(field<double>("mask", "anneal_fraction", [](EC& c) -> auto& { return c.train.prior.anneal_fraction; }));
    f.push_back(field<double>("mask", "elbo_weight", [](EC& c) -> auto& { return c.train.elbo_weight; }));
    f.push_back(field<bool>("mask", "exec_mean_mask", [](EC& c) -> auto& { return c.train.exec_mean_mask; }));

    f.push_back(field<long long>("exec", "comm_ticks", [](EC& c) -> auto& { return c.schedule.comm_ticks; }));
    f.push_back(field<long long>("exec", "control_ticks", [](EC& c) -> auto& { return c.schedule.control_ticks; }));
    f.push_back(field<double>("exec", "drop", [](EC& c) -> auto& { return c.channel.drop; }));
    f.push_back(field<long long>("exec", "delay", [](EC& c) -> auto& { return c.channel.delay; }));
    f.push_back(field<long long>("exec", "jitter", [](EC& c) -> auto& { return c.channel.jitter; }));
    f.push_back(field<int>("exec", "episodes", [](EC& c) -> auto& { return c.exec_episodes; }));

    f.push_back({"experiment", "seeds", [](const EC& c) { return format_seeds(c.seeds); },
                 [](EC& c, const std::string& lit) { c.seeds = parse_seeds(lit); }});
    f.push_back(field<std::string>("experiment", "output_dir", [](EC& c) -> auto& { return c.output_dir; }));
    f.push_back(field<int>("experiment", "checkpoint_every", [](EC& c) -> auto& { return c.checkpoint_every; }));
    f.push_back(field<bool>("experiment", "plot", [](EC& c) -> auto& { return c.plot; }));
    return f;
  }();
  return all;
}

const char* const kSections[] = {"env", "train", "mask", "exec", "experiment"};

// Removes a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
      continue;
    }
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

void ExperimentConfig::resolve() {
  try {
    env.graph = graph::graph_from_spec(graph);
    env.validate();
    train.validate();
    schedule.validate();
    channel.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(0, e.what());
  }
  if (seeds.empty()) throw ConfigError(0, "seed list is empty");
  if (exec_episodes < 1) throw ConfigError(0, "exec episodes must be positive");
  if (checkpoint_every < 0) throw ConfigError(0, "checkpoint interval must be non-negative");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return serialize_config(*this) == serialize_config(o);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
        throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(line_no, "key \"" + key + "\" outside a section");
    const auto& all = fields();
    auto it = std::find_if(all.begin(), all.end(),
                           [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == all.end()) throw ConfigError(line_no, "unknown key \"" + key + "\" in [" + section + "]");
    if (!seen.insert(section + "." + key).second)
      throw ConfigError(line_no, "duplicate key \"" + key + "\" in [" + section + "]");
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(line_no, section + "." + key + ": " + e.what());
    }
  }
  cfg.resolve();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_config(config)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<KeyInfo> config_keys() {
  const ExperimentConfig defaults;
  std::vector<KeyInfo> out;
  for (const auto& f : fields()) out.push_back({f.section, f.key, f.get(defaults)});
  return out;
}

}  // namespace bayesg::harness
