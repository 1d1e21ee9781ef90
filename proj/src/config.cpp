#include "attnrec/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "attnrec/errors.hpp"

namespace attnrec {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(key + ": cannot parse '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view text, const std::string& key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + std::string(text) + "'");
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, double>) {
      out += fmt(values[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

template <typename T>
Field number(std::string key, T& target) {
  return Field{key, [&target, key](std::string_view v) { target = parse_number<T>(v, key); },
               [&target] {
                 if constexpr (std::is_floating_point_v<T>) {
                   return fmt(target);
                 } else {
                   return std::to_string(target);
                 }
               }};
}

Field flag(std::string key, bool& target) {
  return Field{key, [&target, key](std::string_view v) { target = parse_bool(v, key); },
               [&target] { return std::string(target ? "true" : "false"); }};
}

Field text(std::string key, std::string& target) {
  return Field{key, [&target](std::string_view v) { target = std::string(v); }, [&target] { return target; }};
}

template <typename T>
Field list(std::string key, std::vector<T>& target) {
  return Field{key,
               [&target, key](std::string_view v) {
                 target.clear();
                 for (auto item : split_list(v)) {
                   if constexpr (std::is_same_v<T, std::string>) {
                     target.emplace_back(item);
                   } else {
                     target.push_back(parse_number<T>(item, key));
                   }
                 }
               },
               [&target] { return fmt_list(target); }};
}

std::vector<Field> bind(RunConfig& c) {
  return {
      text("run.out_dir", c.run.out_dir),
      number("run.threads", c.run.threads),

      text("data.source", c.data.source),
      text("data.log_path", c.data.log_path),
      number("data.min_user_events", c.data.min_user_events),
      number("data.min_item_count", c.data.min_item_count),
      number("data.boundary", c.data.boundary),
      number("data.test_fraction", c.data.test_fraction),

      number("synth.users", c.synth.n_users),
      number("synth.items", c.synth.n_items),
      number("synth.clusters", c.synth.n_clusters),
      number("synth.events_per_user", c.synth.events_per_user),
      number("synth.concentration", c.synth.concentration),
      number("synth.seed", c.synth.seed),

      number("embed.dim", c.embed.dim),
      number("embed.window", c.embed.window),
      number("embed.negatives", c.embed.negatives),
      number("embed.gamma", c.embed.gamma),
      number("embed.lr", c.embed.learning_rate),
      number("embed.epochs", c.embed.epochs),
      number("embed.seed", c.embed.seed),

      number("model.depth", c.model.attention.depth),
      number("model.hidden", c.model.attention.hidden),
      list("model.depth_ablation", c.model.depth_ablation),
      number("model.dan_hidden", c.model.dan.hidden),
      number("model.dan_layers", c.model.dan.layers),
      number("model.max_history", c.model.max_history),

      number("train.batch", c.train.batch_size),
      number("train.lr", c.train.learning_rate),
      number("train.beta1", c.train.beta1),
      number("train.beta2", c.train.beta2),
      number("train.clip_norm", c.train.clip_norm),
      number("train.patience", c.train.patience),
      number("train.decay", c.train.decay),
      number("train.max_reductions", c.train.max_reductions),
      number("train.eval_period", c.train.eval_period),
      number("train.min_improvement", c.train.min_improvement),
      number("train.max_updates", c.train.max_updates),
      number("train.n_future", c.train.n_future),
      number("train.n_negatives", c.train.n_negatives),
      number("train.gamma", c.train.gamma),
      flag("train.exclude_observed", c.train.exclude_observed),
      flag("train.resample_negatives", c.train.resample_negatives),
      number("train.seed", c.train.seed),

      number("holdout.fraction", c.holdout.fraction),
      number("holdout.cap", c.holdout.cap),

      number("weighted_sum.iterations", c.weighted_sum.iterations),
      number("weighted_sum.population", c.weighted_sum.population),
      number("weighted_sum.sigma0", c.weighted_sum.sigma0),
      number("weighted_sum.n_negatives", c.weighted_sum.n_negatives),
      number("weighted_sum.gamma", c.weighted_sum.gamma),
      number("weighted_sum.seed", c.weighted_sum.seed),

      list("eval.gammas", c.eval.gammas),
      list("eval.n_negatives", c.eval.n_negatives),
      list("eval.k", c.eval.k_grid),
      list("eval.models", c.eval.models),
      number("eval.bootstrap", c.eval.bootstrap),
      number("eval.seed", c.eval.seed),
  };
}

Field& find_field(std::vector<Field>& fields, std::string_view key) {
  for (auto& f : fields) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

const std::set<std::string> kKnownModels{"popularity", "last_item", "weighted_sum", "dan", "attention"};

}  // namespace

void RunConfig::validate() const {
  if (run.out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
  if (run.threads < 1) throw ConfigError("run.threads must be >= 1");

  if (data.source != "synth" && data.source != "log") throw ConfigError("data.source must be synth or log");
  if (data.source == "log" && data.log_path.empty()) throw ConfigError("data.log_path is required when data.source = log");
  if (data.min_user_events < 1) throw ConfigError("data.min_user_events must be >= 1");
  if (data.min_item_count < 1) throw ConfigError("data.min_item_count must be >= 1");
  if (data.boundary < 0) throw ConfigError("data.boundary must be >= 0");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) throw ConfigError("data.test_fraction must be in (0, 1)");

  if (synth.n_users < 1 || synth.n_items < 1 || synth.n_clusters < 1 || synth.events_per_user < 1) {
    throw ConfigError("synth sizes must be >= 1");
  }
  if (synth.n_clusters > synth.n_items) throw ConfigError("synth.clusters must not exceed synth.items");
  if (!(synth.concentration > 0.0)) throw ConfigError("synth.concentration must be > 0");

  try {
    embed.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("embed: ") + e.what());
  }

  if (model.attention.depth < 1) throw ConfigError("model.depth must be >= 1");
  if (model.attention.hidden < 1) throw ConfigError("model.hidden must be >= 1");
  for (int k : model.depth_ablation) {
    if (k < 1) throw ConfigError("model.depth_ablation entries must be >= 1");
  }
  if (model.dan.hidden < 1) throw ConfigError("model.dan_hidden must be >= 1");
  if (model.dan.layers < 0) throw ConfigError("model.dan_layers must be >= 0");

  TrainConfig t = train;
  t.threads = run.threads;
  t.validate();

  if (!(holdout.fraction > 0.0 && holdout.fraction < 1.0)) throw ConfigError("holdout.fraction must be in (0, 1)");
  if (holdout.cap < 1) throw ConfigError("holdout.cap must be >= 1");

  if (weighted_sum.iterations < 0) throw ConfigError("weighted_sum.iterations must be >= 0");
  if (weighted_sum.population < 0) throw ConfigError("weighted_sum.population must be >= 0");
  if (!(weighted_sum.sigma0 > 0.0)) throw ConfigError("weighted_sum.sigma0 must be > 0");
  if (weighted_sum.n_negatives < 1) throw ConfigError("weighted_sum.n_negatives must be >= 1");
  if (!(weighted_sum.gamma >= 0.0 && weighted_sum.gamma <= 1.0)) throw ConfigError("weighted_sum.gamma must be in [0, 1]");

  if (eval.gammas.empty()) throw ConfigError("eval.gammas must not be empty");
  for (double g : eval.gammas) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("eval.gammas entries must be in [0, 1]");
  }
  if (eval.n_negatives.empty()) throw ConfigError("eval.n_negatives must not be empty");
  for (auto n : eval.n_negatives) {
    if (n < 1) throw ConfigError("eval.n_negatives entries must be >= 1");
  }
  if (eval.k_grid.empty()) throw ConfigError("eval.k must not be empty");
  for (auto k : eval.k_grid) {
    if (k < 1) throw ConfigError("eval.k entries must be >= 1");
  }
  if (eval.models.empty()) throw ConfigError("eval.models must not be empty");
  for (const auto& m : eval.models) {
    if (!kKnownModels.contains(m)) throw ConfigError("eval.models: unknown model '" + m + "'");
  }
  if (eval.bootstrap < 1) throw ConfigError("eval.bootstrap must be >= 1");
}

std::string RunConfig::canonical() const {
  RunConfig copy = *this;
  std::string out;
  for (const auto& f : bind(copy)) out += f.key + "=" + f.get() + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const auto& f : bind(c)) keys.push_back(f.key);
  return keys;
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
  auto fields = bind(config);
  find_field(fields, trim(assignment.substr(0, eq))).set(trim(assignment.substr(eq + 1)));
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin) {
  auto fields = bind(config);
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    try {
      find_field(fields, full).set(trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    apply_config_text(config, os.str(), path);
  }
  for (const auto& o : overrides) apply_override(config, o);
  config.validate();
  return config;
}

}  // namespace attnrec
