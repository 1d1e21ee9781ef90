#pragma once

// Interaction logs, the item vocabulary, per-user histories and the temporal
// splits used for training and evaluation.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attnrec {

enum class Action : std::uint8_t { purchase = 0, view = 1, stream_video = 2, stream_music = 3 };
inline constexpr int kNumActions = 4;

std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view s);

// One raw log record, ids still opaque strings.
struct InteractionEvent {
  std::string user_id;
  std::string item_id;
  Action action = Action::view;
  std::int64_t timestamp = 0;
};

// A record after ingest; `item` is a dense vocabulary index.
struct Event {
  int item = 0;
  Action action = Action::view;
  std::int64_t timestamp = 0;

  bool operator==(const Event&) const = default;
};

// Events of one user, ascending by timestamp with ties in input order.
struct UserHistory {
  std::string user_id;
  std::vector<Event> events;

  bool operator==(const UserHistory&) const = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> ids, std::vector<std::int64_t> counts);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(int index) const { return ids_.at(static_cast<std::size_t>(index)); }
  std::optional<int> index(std::string_view id) const;
  std::int64_t count(int index) const { return counts_.at(static_cast<std::size_t>(index)); }
  std::span<const std::int64_t> counts() const { return counts_; }
  const std::vector<std::string>& ids() const { return ids_; }

  bool operator==(const Vocabulary& o) const { return ids_ == o.ids_ && counts_ == o.counts_; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, int> lookup_;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<UserHistory> histories;
};

inline constexpr int kDefaultMinUserEvents = 3;
inline constexpr int kDefaultMinItemCount = 2;

/// Parses a tab-separated interaction log. Throws DataError naming the line.
std::vector<InteractionEvent> read_log(const std::string& path);
std::vector<InteractionEvent> parse_log(std::string_view text);

/// Indexes raw events. Item and user thresholds are applied alternately until
/// neither removes anything, so the result satisfies both. Items are indexed in
/// lexicographic id order and users are listed in lexicographic id order.
Corpus build_corpus(std::span<const InteractionEvent> events, int min_user_events = kDefaultMinUserEvents,
                    int min_item_count = kDefaultMinItemCount);

Corpus ingest(const std::string& path, int min_user_events = kDefaultMinUserEvents,
              int min_item_count = kDefaultMinItemCount);

/// Writes histories back out in the interaction-log format.
void write_log(const Corpus& corpus, const std::string& path);
void write_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary read_vocabulary(const std::string& path);

/// Number of distinct users who touched each item.
std::vector<std::int64_t> item_user_counts(std::span<const UserHistory> histories, std::size_t n_items);

/// Distinct items in order of first occurrence.
std::vector<int> distinct_items(std::span<const Event> events);

struct SplitInstance {
  std::string user_id;
  std::vector<int> observed;
  std::vector<int> future;
};

// Observed events (with timestamps and actions) and future items of one user.
struct EventSplit {
  std::vector<Event> observed;
  std::vector<int> future;
};

/// Future = the last n_future distinct items; observed = events before them
/// whose item is not a future item. nullopt when fewer than n_future + 1
/// distinct items exist.
std::optional<EventSplit> split_events(const UserHistory& history, int n_future);

/// As split_events, reduced to distinct item lists. When max_observed > 0 only
/// the most recently touched observed items are kept.
std::optional<SplitInstance> temporal_split(const UserHistory& history, int n_future,
                                            std::size_t max_observed = 0);

struct TestPair {
  std::size_t user = 0;  // index into TrainTestSplit::train
  std::vector<int> items;
};

struct TrainTestSplit {
  std::vector<UserHistory> train;
  std::vector<TestPair> test;
};

/// Half-open split: training is [start, boundary), test is [boundary, end].
/// Test items exclude anything the user touched in training; users with no
/// training events are dropped and users with an empty test set get no pair.
TrainTestSplit train_test_split(std::span<const UserHistory> histories, std::int64_t boundary);

struct SynthConfig {
  int n_users = 2000;
  int n_items = 500;
  int n_clusters = 10;
  int events_per_user = 30;
  double concentration = 0.1;  // symmetric Dirichlet; +inf means uniform preferences
  std::uint64_t seed = 1;
};

inline constexpr std::int64_t kSynthEventSpacing = 3600;

struct SynthData {
  std::vector<InteractionEvent> events;
  Corpus corpus;
  std::vector<int> item_cluster;  // by vocabulary index
};

/// Planted-cluster generator. Items are split into contiguous equal blocks;
/// each user draws cluster preferences from a symmetric Dirichlet and then
/// draws events i.i.d. Event j of user u is at j * kSynthEventSpacing + u % 3600.
SynthData synth_generate(const SynthConfig& config);

/// Cluster of raw synthetic item number `item` (0-based) for the given sizes.
int synth_cluster_of(int item, int n_items, int n_clusters);

}  // namespace attnrec
