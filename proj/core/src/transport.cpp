#include "cbsolve/transport.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cbsolve/errors.hpp"

namespace cbsolve {

namespace {

// Thrown into ranks that were still running when another rank failed.
class Aborted : public TransportError {
 public:
  Aborted() : TransportError("world aborted after a failure on another rank") {}
};

constexpr int kReduceTag = 900;
constexpr std::size_t kNoTurn = std::numeric_limits<std::size_t>::max();

}  // namespace

struct World::State {
  enum class Status { ready, recv_wait, barrier_wait, done };

  State(std::size_t ranks, ExecutionMode m) : mode(m), p(ranks) { reset(); }

  void reset() {
    status.assign(p, Status::ready);
    waiting_on.assign(p, {0, 0});
    inbox.assign(p, {});
    barrier_arrived = 0;
    barrier_generation = 0;
    barrier_label.clear();
    barrier_wait_gen.assign(p, 0);
    turn = 0;
    aborted = false;
    error = nullptr;
  }

  bool runnable(RankId r) const {
    switch (status[r]) {
      case Status::ready:
        return true;
      case Status::recv_wait: {
        auto it = inbox[r].find(waiting_on[r]);
        return it != inbox[r].end() && !it->second.empty();
      }
      case Status::barrier_wait:
        return barrier_generation > barrier_wait_gen[r];
      case Status::done:
        return false;
    }
    return false;
  }

  bool all_stuck() const {
    bool any_waiting = false;
    for (RankId r = 0; r < p; ++r) {
      if (status[r] == Status::done) continue;
      if (runnable(r)) return false;
      any_waiting = true;
    }
    return any_waiting;
  }

  std::string describe_deadlock() const {
    std::ostringstream os;
    os << "deadlock:";
    for (RankId r = 0; r < p; ++r) {
      if (status[r] == Status::recv_wait) {
        os << " rank " << r << " waits for a message from rank " << waiting_on[r].first << " (tag "
           << waiting_on[r].second << ");";
      } else if (status[r] == Status::barrier_wait) {
        os << " rank " << r << " waits at barrier '" << barrier_label << "';";
      }
    }
    return os.str();
  }

  void fail(std::exception_ptr e) {
    if (!error) error = std::move(e);
    aborted = true;
    cv.notify_all();
  }

  void fail_deadlock() { fail(std::make_exception_ptr(TransportError(describe_deadlock()))); }

  // Lockstep: pass control to the next runnable rank after `me`.
  void hand_off(RankId me) {
    for (std::size_t k = 1; k <= p; ++k) {
      const RankId c = (me + k) % p;
      if (runnable(c)) {
        turn = c;
        cv.notify_all();
        return;
      }
    }
    turn = kNoTurn;
    if (all_stuck()) fail_deadlock();
    cv.notify_all();
  }

  void block(std::unique_lock<std::mutex>& lk, RankId me) {
    if (mode == ExecutionMode::lockstep) {
      hand_off(me);
      cv.wait(lk, [&] { return aborted || turn == me; });
    } else {
      if (all_stuck()) fail_deadlock();
      cv.wait(lk, [&] { return aborted || runnable(me); });
    }
    if (aborted) throw Aborted();
  }

  std::mutex mu;
  std::condition_variable cv;
  ExecutionMode mode;
  std::size_t p;
  std::vector<Status> status;
  std::vector<std::pair<RankId, int>> waiting_on;
  std::vector<std::map<std::pair<RankId, int>, std::deque<Dense>>> inbox;
  std::size_t barrier_arrived = 0;
  std::uint64_t barrier_generation = 0;
  std::string barrier_label;
  std::vector<std::uint64_t> barrier_wait_gen;
  std::size_t turn = 0;
  bool aborted = false;
  std::exception_ptr error;
};

class World::Endpoint final : public Communicator {
 public:
  Endpoint(State& state, RankId rank) : state_(state), rank_(rank) {}

  RankId rank() const override { return rank_; }
  std::size_t size() const override { return state_.p; }

  void send(RankId to, int tag, const Dense& payload) override {
    if (to >= state_.p) throw InvalidArgument("send to rank " + std::to_string(to) + " outside world");
    std::lock_guard lk(state_.mu);
    if (state_.aborted) throw Aborted();
    state_.inbox[to][{rank_, tag}].push_back(payload);
    const std::size_t values = payload.rows() * payload.cols();
    counters_.messages_sent += 1;
    counters_.values_sent += values;
    counters_.bytes_sent += values * sizeof(double);
    trace_.push_back({TraceEvent::Kind::send, to, tag, payload.rows(), payload.cols(), stage_});
    if (state_.mode == ExecutionMode::concurrent) state_.cv.notify_all();
  }

  Dense recv(RankId from, int tag) override {
    if (from >= state_.p) throw InvalidArgument("recv from rank " + std::to_string(from) + " outside world");
    std::unique_lock lk(state_.mu);
    for (;;) {
      if (state_.aborted) throw Aborted();
      auto& box = state_.inbox[rank_];
      auto it = box.find({from, tag});
      if (it != box.end() && !it->second.empty()) {
        Dense out = std::move(it->second.front());
        it->second.pop_front();
        state_.status[rank_] = State::Status::ready;
        trace_.push_back({TraceEvent::Kind::recv, from, tag, out.rows(), out.cols(), stage_});
        return out;
      }
      state_.status[rank_] = State::Status::recv_wait;
      state_.waiting_on[rank_] = {from, tag};
      state_.block(lk, rank_);
    }
  }

  void stage_barrier(std::string_view label) override {
    std::unique_lock lk(state_.mu);
    if (state_.aborted) throw Aborted();
    counters_.stages_entered += 1;
    stage_ = std::string(label);
    trace_.push_back({TraceEvent::Kind::barrier, rank_, 0, 0, 0, stage_});
    if (state_.barrier_arrived == 0) {
      state_.barrier_label = stage_;
    } else if (state_.barrier_label != stage_) {
      ProtocolError err("barrier label mismatch: rank " + std::to_string(rank_) + " entered '" + stage_ +
                        "' while others entered '" + state_.barrier_label + "'");
      state_.fail(std::make_exception_ptr(err));
      throw err;
    }
    const std::uint64_t gen = state_.barrier_generation;
    if (++state_.barrier_arrived == state_.p) {
      state_.barrier_arrived = 0;
      ++state_.barrier_generation;
      state_.cv.notify_all();
      return;
    }
    state_.status[rank_] = State::Status::barrier_wait;
    state_.barrier_wait_gen[rank_] = gen;
    state_.block(lk, rank_);
    state_.status[rank_] = State::Status::ready;
  }

  const Counters& counters() const override { return counters_; }
  void reset_counters() override {
    counters_ = {};
    trace_.clear();
  }
  const std::vector<TraceEvent>& trace() const override { return trace_; }

  void new_run() { stage_.clear(); }

 private:
  State& state_;
  RankId rank_;
  Counters counters_;
  std::vector<TraceEvent> trace_;
  std::string stage_;
};

World::World(std::size_t ranks, ExecutionMode mode) {
  if (ranks == 0) throw InvalidArgument("a world needs at least one rank");
  state_ = std::make_unique<State>(ranks, mode);
  for (RankId r = 0; r < ranks; ++r) endpoints_.push_back(std::make_unique<Endpoint>(*state_, r));
}

World::~World() = default;

std::size_t World::size() const noexcept { return state_->p; }
ExecutionMode World::mode() const noexcept { return state_->mode; }

void World::run(const std::function<void(Communicator&)>& body) {
  State& st = *state_;
  st.reset();
  for (auto& ep : endpoints_) ep->new_run();

  auto rank_main = [&](RankId r) {
    {
      std::unique_lock lk(st.mu);
      if (st.mode == ExecutionMode::lockstep) st.cv.wait(lk, [&] { return st.aborted || st.turn == r; });
      if (st.aborted) {
        st.status[r] = State::Status::done;
        st.cv.notify_all();
        return;
      }
    }
    try {
      body(*endpoints_[r]);
    } catch (...) {
      std::lock_guard lk(st.mu);
      st.fail(std::current_exception());
    }
    std::lock_guard lk(st.mu);
    st.status[r] = State::Status::done;
    if (!st.aborted) {
      if (st.mode == ExecutionMode::lockstep) {
        if (st.turn == r) st.hand_off(r);
      } else if (st.all_stuck()) {
        st.fail_deadlock();
      }
    }
    st.cv.notify_all();
  };

  std::vector<std::thread> threads;
  threads.reserve(st.p);
  for (RankId r = 0; r < st.p; ++r) threads.emplace_back(rank_main, r);
  for (auto& t : threads) t.join();
  if (st.error) std::rethrow_exception(st.error);
}

const Counters& World::counters(RankId rank) const { return endpoints_.at(rank)->counters(); }

Counters World::total_counters() const {
  Counters total;
  for (const auto& ep : endpoints_) total += ep->counters();
  return total;
}

const std::vector<TraceEvent>& World::trace(RankId rank) const { return endpoints_.at(rank)->trace(); }

void World::reset_counters() {
  for (auto& ep : endpoints_) ep->reset_counters();
}

void SelfCommunicator::send(RankId to, int tag, const Dense& payload) {
  if (to != 0) throw InvalidArgument("self communicator has only rank 0");
  queue_[tag].push_back(payload);
  const std::size_t values = payload.rows() * payload.cols();
  counters_.messages_sent += 1;
  counters_.values_sent += values;
  counters_.bytes_sent += values * sizeof(double);
  trace_.push_back({TraceEvent::Kind::send, 0, tag, payload.rows(), payload.cols(), stage_});
}

Dense SelfCommunicator::recv(RankId from, int tag) {
  if (from != 0) throw InvalidArgument("self communicator has only rank 0");
  auto it = queue_.find(tag);
  if (it == queue_.end() || it->second.empty()) {
    throw TransportError("deadlock: rank 0 waits for a message from itself (tag " + std::to_string(tag) + ")");
  }
  Dense out = std::move(it->second.front());
  it->second.erase(it->second.begin());
  trace_.push_back({TraceEvent::Kind::recv, 0, tag, out.rows(), out.cols(), stage_});
  return out;
}

void SelfCommunicator::stage_barrier(std::string_view label) {
  counters_.stages_entered += 1;
  stage_ = std::string(label);
  trace_.push_back({TraceEvent::Kind::barrier, 0, 0, 0, 0, stage_});
}

void SelfCommunicator::reset_counters() {
  counters_ = {};
  trace_.clear();
}

namespace {

std::vector<double> allreduce(Communicator& comm, std::span<const double> values, bool take_max) {
  const std::size_t p = comm.size();
  std::vector<double> out(values.begin(), values.end());
  if (p == 1) return out;
  Dense mine(1, values.size());
  std::copy(values.begin(), values.end(), mine.values().begin());
  for (RankId q = 0; q < p; ++q) {
    if (q != comm.rank()) comm.send(q, kReduceTag, mine);
  }
  for (RankId q = 0; q < p; ++q) {
    const Dense part = q == comm.rank() ? mine : comm.recv(q, kReduceTag);
    if (part.cols() != values.size()) throw ProtocolError("allreduce: ranks contributed different lengths");
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double v = part(0, k);
      if (q == 0) {
        out[k] = v;
      } else {
        out[k] = take_max ? std::max(out[k], v) : out[k] + v;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> allreduce_sum(Communicator& comm, std::span<const double> values) {
  return allreduce(comm, values, false);
}

std::vector<double> allreduce_max(Communicator& comm, std::span<const double> values) {
  return allreduce(comm, values, true);
}

}  // namespace cbsolve
