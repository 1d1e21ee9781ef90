#include "attnrec/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "attnrec/errors.hpp"
#include "attnrec/sampler.hpp"

namespace attnrec {

void SkipGramConfig::validate() const {
  if (dim < 1) throw ConfigError("embed.dim must be >= 1");
  if (window < 1) throw ConfigError("embed.window must be >= 1");
  if (negatives < 1) throw ConfigError("embed.negatives must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("embed.gamma must be in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("embed.lr must be > 0");
  if (epochs < 0) throw ConfigError("embed.epochs must be >= 0");
}

std::vector<std::pair<int, int>> extract_pairs(std::span<const int> sequence, int window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  std::vector<std::pair<int, int>> pairs;
  const auto n = static_cast<std::ptrdiff_t>(sequence.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - window);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + window);
    for (std::ptrdiff_t s = lo; s <= hi; ++s) {
      if (s == t || sequence[s] == sequence[t]) continue;
      pairs.emplace_back(sequence[t], sequence[s]);
    }
  }
  return pairs;
}

double sg_loss(const EmbeddingTable& table, int center, int context, std::span<const int> negatives) {
  const auto xc = table.target.row(center);
  double loss = -log_logistic(xc.dot(table.context.row(context)));
  for (int n : negatives) loss -= log_logistic(-xc.dot(table.context.row(n)));
  return loss;
}

SkipGramGradient sg_gradient(const EmbeddingTable& table, int center, int context, std::span<const int> negatives) {
  SkipGramGradient g;
  const auto xc = table.target.row(center);
  g.center = VectorXr::Zero(table.dim());
  auto accumulate = [&](int item, double coeff) {
    g.center += coeff * table.context.row(item).transpose();
    const auto it = std::find(g.context_items.begin(), g.context_items.end(), item);
    if (it == g.context_items.end()) {
      g.context_items.push_back(item);
      g.context_grads.emplace_back(coeff * xc.transpose());
    } else {
      g.context_grads[static_cast<std::size_t>(it - g.context_items.begin())] += coeff * xc.transpose();
    }
  };
  accumulate(context, logistic(xc.dot(table.context.row(context))) - 1.0);
  for (int n : negatives) accumulate(n, logistic(xc.dot(table.context.row(n))));
  return g;
}

double sg_step(EmbeddingTable& table, int center, int context, std::span<const int> negatives, double lr) {
  const double loss = sg_loss(table, center, context, negatives);
  const SkipGramGradient g = sg_gradient(table, center, context, negatives);
  table.target.row(center) -= lr * g.center.transpose();
  for (std::size_t k = 0; k < g.context_items.size(); ++k) {
    table.context.row(g.context_items[k]) -= lr * g.context_grads[k].transpose();
  }
  return loss;
}

EmbeddingTable init_embeddings(std::vector<std::string> ids, int dim, Rng& rng) {
  EmbeddingTable table;
  const auto n = static_cast<Eigen::Index>(ids.size());
  table.ids = std::move(ids);
  table.target.resize(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) table.target(i, j) = (rng.uniform() - 0.5) / dim;
  table.context = MatrixXr::Zero(n, dim);
  return table;
}

EmbeddingTable train_embeddings(const Vocabulary& vocab, std::span<const UserHistory> histories,
                                const SkipGramConfig& config) {
  config.validate();
  if (vocab.size() == 0) throw ConfigError("train_embeddings: empty vocabulary");
  Rng rng(config.seed);
  Rng init_rng = rng.split();
  EmbeddingTable table = init_embeddings(vocab.ids(), config.dim, init_rng);

  const AliasTable noise(build_distribution(vocab.counts(), config.gamma));

  std::vector<std::vector<int>> sequences;
  sequences.reserve(histories.size());
  std::size_t total_pairs = 0;
  for (const auto& h : histories) {
    std::vector<int> seq;
    seq.reserve(h.events.size());
    for (const auto& e : h.events) seq.push_back(e.item);
    total_pairs += extract_pairs(seq, config.window).size();
    sequences.push_back(std::move(seq));
  }
  const double planned = static_cast<double>(total_pairs) * config.epochs;
  // If every draw would equal the context item there is nothing to push against.
  const bool can_draw = noise.source().support_size() > 1;

  std::vector<std::size_t> order(sequences.size());
  std::vector<int> negs;
  double done = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    for (std::size_t s : order) {
      for (const auto& [center, context] : extract_pairs(sequences[s], config.window)) {
        const double lr = config.learning_rate * (1.0 - 0.99 * done / planned);
        negs.clear();
        while (can_draw && negs.size() < static_cast<std::size_t>(config.negatives)) {
          const int n = noise.sample(rng);
          if (n != context) negs.push_back(n);
        }
        sg_step(table, center, context, negs, lr);
        done += 1.0;
      }
    }
    require_finite(table.target, "train_embeddings");
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.ids[i];
    for (Eigen::Index j = 0; j < table.dim(); ++j) {
      std::snprintf(buf, sizeof buf, " %.9g", table.target(static_cast<Eigen::Index>(i), j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

namespace {

[[noreturn]] void emb_error(std::size_t line, const std::string& what) {
  throw DataError("embeddings line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

EmbeddingTable parse_embeddings(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) emb_error(1, "missing header");
  const auto header = split_spaces(lines[0]);
  std::size_t n = 0;
  long d = 0;
  if (header.size() != 2 || !parse_number(header[0], n) || !parse_number(header[1], d) || d < 1) {
    emb_error(1, "header must be 'N d'");
  }
  if (lines.size() - 1 != n) {
    emb_error(lines.size(), "header declares " + std::to_string(n) + " rows, found " +
                                std::to_string(lines.size() - 1));
  }
  EmbeddingTable table;
  table.ids.reserve(n);
  table.target.resize(static_cast<Eigen::Index>(n), d);
  std::unordered_map<std::string_view, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    const auto f = split_spaces(lines[i + 1]);
    if (f.size() != static_cast<std::size_t>(d) + 1) {
      emb_error(line_no, "expected id and " + std::to_string(d) + " values, got " + std::to_string(f.size()));
    }
    if (!seen.emplace(f[0], i).second) emb_error(line_no, "duplicate id " + std::string(f[0]));
    table.ids.emplace_back(f[0]);
    for (long j = 0; j < d; ++j) {
      double v = 0.0;
      if (!parse_number(f[static_cast<std::size_t>(j) + 1], v) || !std::isfinite(v)) {
        emb_error(line_no, "bad value '" + std::string(f[static_cast<std::size_t>(j) + 1]) + "'");
      }
      table.target(static_cast<Eigen::Index>(i), j) = v;
    }
  }
  table.context = MatrixXr::Zero(table.target.rows(), d);
  return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_embeddings(os.str());
}

EmbeddingTable align_embeddings(const EmbeddingTable& table, const Vocabulary& vocab) {
  std::unordered_map<std::string_view, Eigen::Index> row;
  for (std::size_t i = 0; i < table.ids.size(); ++i) row.emplace(table.ids[i], static_cast<Eigen::Index>(i));
  EmbeddingTable out;
  out.ids = vocab.ids();
  out.target.resize(static_cast<Eigen::Index>(vocab.size()), table.dim());
  out.context = MatrixXr::Zero(out.target.rows(), table.dim());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto it = row.find(vocab.ids()[i]);
    if (it == row.end()) throw DataError("no embedding for item " + vocab.ids()[i]);
    out.target.row(static_cast<Eigen::Index>(i)) = table.target.row(it->second);
  }
  return out;
}

}  // namespace attnrec
