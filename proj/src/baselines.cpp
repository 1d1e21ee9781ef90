#include "attnrec/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "attnrec/errors.hpp"

namespace attnrec {

std::vector<int> popularity_rank(std::span<const std::int64_t> counts, std::span<const int> candidates) {
  std::vector<int> out(candidates.begin(), candidates.end());
  auto count_of = [&](int i) {
    return i >= 0 && static_cast<std::size_t>(i) < counts.size() ? counts[static_cast<std::size_t>(i)] : 0;
  };
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    const auto ca = count_of(a);
    const auto cb = count_of(b);
    return ca != cb ? ca > cb : a < b;
  });
  return out;
}

double last_item_score(const EmbeddingTable& table, std::span<const Event> history, int query) {
  if (history.empty()) throw ConfigError("last_item_score: empty history");
  // Latest timestamp wins; among ties the later event in list order.
  const Event* last = &history.front();
  for (const auto& e : history) {
    if (e.timestamp >= last->timestamp) last = &e;
  }
  return cosine(table.target.row(last->item), table.target.row(query));
}

void WeightedSumParams::validate() const {
  if (!(decay >= 0.0) || !std::isfinite(decay)) throw ConfigError("weighted sum decay must be finite and >= 0");
  bool any = false;
  for (double w : type_weight) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weighted sum type weights must be finite and >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw ConfigError("weighted sum needs at least one positive type weight");
}

VectorXr weighted_user_vector(const EmbeddingTable& table, std::span<const Event> history,
                              const WeightedSumParams& params, std::int64_t now) {
  params.validate();
  if (history.empty()) throw ConfigError("weighted_user_vector: empty history");
  std::vector<Event> events(history.begin(), history.end());
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.item != b.item) return a.item < b.item;
    return a.action < b.action;
  });
  const std::int64_t t_max = events.back().timestamp;
  if (now < t_max) throw ConfigError("weighted_user_vector: history contains events after 'now'");
  VectorXr acc = VectorXr::Zero(table.dim());
  double total = 0.0;
  for (const auto& e : events) {
    const double w = params.type_weight[static_cast<std::size_t>(e.action)] *
                     std::exp(-params.decay * static_cast<double>(t_max - e.timestamp));
    if (w == 0.0) continue;
    acc += w * table.target.row(e.item).transpose();
    total += w;
  }
  if (total == 0.0) {
    // Only zero-weight action types in the history: fall back to the plain mean.
    for (const auto& e : events) acc += table.target.row(e.item).transpose();
    total = static_cast<double>(events.size());
  }
  return acc / total;
}

double weighted_sum_score(const EmbeddingTable& table, std::span<const Event> history,
                          const WeightedSumParams& params, std::int64_t now, int query) {
  return cosine(weighted_user_vector(table, history, params, now), table.target.row(query).transpose());
}

std::string format_weighted_sum(const WeightedSumParams& p) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", p.decay);
  os << "decay=" << buf << '\n';
  for (int a = 0; a < kNumActions; ++a) {
    std::snprintf(buf, sizeof buf, "%.17g", p.type_weight[static_cast<std::size_t>(a)]);
    os << "weight." << to_string(static_cast<Action>(a)) << '=' << buf << '\n';
  }
  return os.str();
}

WeightedSumParams parse_weighted_sum(std::string_view text) {
  WeightedSumParams p;
  std::map<std::string, double> kv;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("weighted sum line " + std::to_string(line_no) + ": missing '='");
    double v = 0.0;
    const auto value = line.substr(eq + 1);
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw DataError("weighted sum line " + std::to_string(line_no) + ": bad number");
    }
    kv[std::string(line.substr(0, eq))] = v;
  }
  for (const auto& [key, v] : kv) {
    if (key == "decay") {
      p.decay = v;
      continue;
    }
    bool known = false;
    for (int a = 0; a < kNumActions; ++a) {
      if (key == "weight." + std::string(to_string(static_cast<Action>(a)))) {
        p.type_weight[static_cast<std::size_t>(a)] = v;
        known = true;
      }
    }
    if (!known) throw DataError("weighted sum: unknown key " + key);
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  return p;
}

void save_weighted_sum(const WeightedSumParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << format_weighted_sum(params);
}

WeightedSumParams load_weighted_sum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_weighted_sum(os.str());
}

}  // namespace attnrec
