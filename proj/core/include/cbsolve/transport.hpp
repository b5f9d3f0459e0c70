#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbsolve/dense.hpp"

namespace cbsolve {

using RankId = std::size_t;

/// Per-rank instrumentation. Monotone until reset explicitly.
struct Counters {
  std::uint64_t messages_sent = 0;
  std::uint64_t bytes_sent = 0;  // payload bytes (8 per value), framing excluded
  std::uint64_t values_sent = 0;
  std::uint64_t stages_entered = 0;

  Counters& operator+=(const Counters& o) {
    messages_sent += o.messages_sent;
    bytes_sent += o.bytes_sent;
    values_sent += o.values_sent;
    stages_entered += o.stages_entered;
    return *this;
  }
  friend bool operator==(const Counters&, const Counters&) = default;
};

struct TraceEvent {
  enum class Kind { send, recv, barrier };
  Kind kind = Kind::send;
  RankId peer = 0;  // unused for barriers
  int tag = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string stage;  // label of the most recent barrier

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Rank-addressed message passing between the ranks of one world.
///
/// Payloads are dense blocks; the (rows, cols) shape travels with the data.
/// Delivery is reliable and FIFO per (sender, receiver, tag). Sends never
/// block; recv blocks until a matching message arrives.
class Communicator {
 public:
  virtual ~Communicator() = default;

  virtual RankId rank() const = 0;
  virtual std::size_t size() const = 0;

  virtual void send(RankId to, int tag, const Dense& payload) = 0;
  virtual Dense recv(RankId from, int tag) = 0;

  /// Collective stage delimiter. Every rank must call it with the same label;
  /// increments stages_entered.
  virtual void stage_barrier(std::string_view label) = 0;

  virtual const Counters& counters() const = 0;
  virtual void reset_counters() = 0;
  virtual const std::vector<TraceEvent>& trace() const = 0;
};

enum class ExecutionMode {
  /// One rank runs at a time; control passes round-robin whenever the running
  /// rank blocks. Message order and results are fully deterministic.
  lockstep,
  /// Every rank runs freely on its own thread.
  concurrent,
};

/// In-process world of p connected endpoints.
///
/// run() executes the same body on every rank and returns once all ranks have
/// finished. If any rank throws, the others are aborted and the first genuine
/// failure is rethrown. A state where every unfinished rank waits on something
/// that can never arrive is reported as a TransportError instead of hanging.
class World {
 public:
  explicit World(std::size_t ranks, ExecutionMode mode = ExecutionMode::lockstep);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  std::size_t size() const noexcept;
  ExecutionMode mode() const noexcept;

  void run(const std::function<void(Communicator&)>& body);

  const Counters& counters(RankId rank) const;
  Counters total_counters() const;
  const std::vector<TraceEvent>& trace(RankId rank) const;
  void reset_counters();

 private:
  struct State;
  class Endpoint;
  std::unique_ptr<State> state_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

/// Single-rank communicator with no threads; messages sent to self are
/// queued, and a recv with nothing queued is a deadlock.
class SelfCommunicator final : public Communicator {
 public:
  RankId rank() const override { return 0; }
  std::size_t size() const override { return 1; }
  void send(RankId to, int tag, const Dense& payload) override;
  Dense recv(RankId from, int tag) override;
  void stage_barrier(std::string_view label) override;
  const Counters& counters() const override { return counters_; }
  void reset_counters() override;
  const std::vector<TraceEvent>& trace() const override { return trace_; }

 private:
  Counters counters_;
  std::vector<TraceEvent> trace_;
  std::string stage_;
  std::map<int, std::vector<Dense>> queue_;
};

/// Element-wise sum over all ranks. Contributions are added in rank order, so
/// every rank obtains bitwise identical results.
std::vector<double> allreduce_sum(Communicator& comm, std::span<const double> values);
std::vector<double> allreduce_max(Communicator& comm, std::span<const double> values);

/// Reserved tag space. Library components use tags below kUserTagBase.
inline constexpr int kUserTagBase = 1000;

}  // namespace cbsolve
