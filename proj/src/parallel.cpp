#include "rdcfold/parallel.hpp"

#include <algorithm>
#include <bit>
#include <condition_variable>
#include <cstring>
#include <iterator>
#include <thread>

static_assert(std::endian::native == std::endian::little,
              "message codecs assume a little-endian host");

namespace rdcfold {

std::vector<WorkChunk> scatter(std::size_t total, int np) {
  if (np < 1) throw std::invalid_argument("worker count must be >= 1");
  std::vector<WorkChunk> chunks(static_cast<std::size_t>(np));
  const std::size_t base = total / static_cast<std::size_t>(np);
  const std::size_t extra = total % static_cast<std::size_t>(np);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    std::size_t len = base + (i < extra ? 1 : 0);
    chunks[i] = WorkChunk{pos, pos + len};
    pos += len;
  }
  return chunks;
}

struct WorkerPool::State {
  std::mutex mu;
  std::condition_variable cv_start;
  std::condition_variable cv_done;
  const std::function<void(int)>* job = nullptr;
  std::uint64_t generation = 0;
  int remaining = 0;
  bool stop = false;
  bool failed = false;
  int fail_worker = -1;
  std::string fail_what;
  std::vector<std::thread> threads;

  void worker_main(int id) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* current = nullptr;
      {
        std::unique_lock lk(mu);
        cv_start.wait(lk, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
        current = job;
      }
      try {
        (*current)(id);
      } catch (const std::exception& e) {
        std::lock_guard lk(mu);
        if (!failed) {
          failed = true;
          fail_worker = id;
          fail_what = e.what();
        }
      } catch (...) {
        std::lock_guard lk(mu);
        if (!failed) {
          failed = true;
          fail_worker = id;
          fail_what = "unknown error";
        }
      }
      {
        std::lock_guard lk(mu);
        if (--remaining == 0) cv_done.notify_all();
      }
    }
  }
};

WorkerPool::WorkerPool(int np) : np_(np), state_(new State) {
  if (np < 1) throw std::invalid_argument("worker count must be >= 1");
  state_->threads.reserve(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i)
    state_->threads.emplace_back(&State::worker_main, state_.get(), i);
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lk(state_->mu);
    state_->stop = true;
  }
  state_->cv_start.notify_all();
  for (std::thread& t : state_->threads) t.join();
}

void WorkerPool::run_all(const std::function<void(int)>& job) {
  State& st = *state_;
  {
    std::lock_guard lk(st.mu);
    st.job = &job;
    st.remaining = np_;
    st.failed = false;
    st.fail_worker = -1;
    st.fail_what.clear();
    ++st.generation;
  }
  st.cv_start.notify_all();
  {
    std::unique_lock lk(st.mu);
    st.cv_done.wait(lk, [&] { return st.remaining == 0; });
  }
  if (st.failed)
    throw WorkerFailure(st.fail_worker,
                        "worker " + std::to_string(st.fail_worker) + ": " + st.fail_what);
}

namespace {

std::vector<BeamEntry> evaluate_chunk_unsorted(const CrossView& view, WorkChunk chunk,
                                               const EvalContext& ctx, int worker) {
  if (chunk.end > view.size() || chunk.begin > chunk.end)
    throw std::invalid_argument("work chunk outside the combination range");
  std::vector<BeamEntry> out;
  out.reserve(chunk.size());
  std::size_t parent_index = static_cast<std::size_t>(-1);
  BackboneChain prefix;
  for (std::size_t k = chunk.begin; k < chunk.end; ++k) {
    const std::size_t bi = view.beam_index(k);
    const BeamEntry& parent = view.parent(k);
    if (bi != parent_index) {
      parent_index = bi;
      prefix = build_backbone(parent.dihedrals, static_cast<int>(parent.dihedrals.size()) + 1,
                              ctx.geometry);
    }
    BackboneChain chain = append_residue(prefix, view.extension(k), ctx.geometry);
    BeamEntry entry;
    entry.dihedrals.reserve(parent.dihedrals.size() + 1);
    entry.dihedrals = parent.dihedrals;
    entry.dihedrals.push_back(view.extension(k));
    try {
      entry.score = ctx.score(chain, worker);
    } catch (const std::exception& e) {
      throw std::runtime_error("combination " + std::to_string(k) + ": " + e.what());
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

std::vector<BeamEntry> evaluate_chunk(const CrossView& view, WorkChunk chunk,
                                      const EvalContext& ctx, int worker) {
  std::vector<BeamEntry> out = evaluate_chunk_unsorted(view, chunk, ctx, worker);
  std::sort(out.begin(), out.end(), beam_less);
  return out;
}

std::vector<BeamEntry> merge_sorted(const std::vector<BeamEntry>& a,
                                    const std::vector<BeamEntry>& b) {
  std::vector<BeamEntry> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out), beam_less);
  return out;
}

std::vector<BeamEntry> merge_sorted(std::vector<BeamEntry>&& a, std::vector<BeamEntry>&& b) {
  if (a.empty()) return std::move(b);
  if (b.empty()) return std::move(a);
  std::vector<BeamEntry> out;
  out.reserve(a.size() + b.size());
  std::merge(std::make_move_iterator(a.begin()), std::make_move_iterator(a.end()),
             std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()),
             std::back_inserter(out), beam_less);
  return out;
}

std::vector<BeamEntry> parallel_evaluate_and_sort(const CrossView& view, WorkerPool& pool,
                                                  const EvalContext& ctx,
                                                  const EngineOptions& options, TimingLog* log,
                                                  int iteration, IterationStats* stats) {
  const int np = pool.size();
  const std::vector<WorkChunk> chunks = scatter(view.size(), np);
  std::vector<WorkChunk> mailbox(static_cast<std::size_t>(np));
  std::vector<std::vector<BeamEntry>> results(static_cast<std::size_t>(np));

  // Scattered: each worker receives its chunk descriptor (payload stays
  // shared in-process; frame sizes below account the wire cost).
  StopWatch scatter_watch;
  pool.run_all([&](int w) { mailbox[static_cast<std::size_t>(w)] = chunks[static_cast<std::size_t>(w)]; });
  if (log) log->record(iteration, kHeadWorker, SectionLabel::Scattered, scatter_watch.seconds());

  if (stats) {
    const CrossStats cs = view.stats();
    stats->m1 = cs.m1;
    stats->m2 = cs.m2;
    stats->combinations = cs.combinations();
    const std::size_t pairs_per_entry = view.parent(0).dihedrals.size() + 1;
    stats->scatter_bytes = 0;
    stats->gather_bytes = 0;
    for (const WorkChunk& c : chunks) {
      stats->scatter_bytes += encoded_entries_size(c.size(), pairs_per_entry);
      stats->gather_bytes += encoded_results_size(c.size());
    }
    stats->messages = 2 * static_cast<std::uint64_t>(np);
  }

  // Calculated: independent fitness evaluation per worker.
  pool.run_all([&](int w) {
    StopWatch t;
    results[static_cast<std::size_t>(w)] =
        evaluate_chunk_unsorted(view, mailbox[static_cast<std::size_t>(w)], ctx, w);
    if (log) log->record(iteration, w, SectionLabel::Calculated, t.seconds());
  });

  // Sorted, worker half: local sorts ahead of the head merge.
  if (options.local_sort) {
    pool.run_all([&](int w) {
      StopWatch t;
      auto& r = results[static_cast<std::size_t>(w)];
      std::sort(r.begin(), r.end(), beam_less);
      if (log) log->record(iteration, w, SectionLabel::Sorted, t.seconds());
    });
  }

  // Gathered: adopt worker outputs in worker order.
  StopWatch gather_watch;
  std::vector<std::vector<BeamEntry>> gathered;
  gathered.reserve(results.size());
  for (auto& r : results) gathered.push_back(std::move(r));
  if (log) log->record(iteration, kHeadWorker, SectionLabel::Gathered, gather_watch.seconds());

  // Sorted, head half: merge the sorted sublists (or sort everything
  // when workers sent unsorted output).
  StopWatch sort_watch;
  std::vector<BeamEntry> merged;
  if (options.local_sort) {
    if (options.merge_tree) {
      while (gathered.size() > 1) {
        std::vector<std::vector<BeamEntry>> next;
        next.reserve((gathered.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < gathered.size(); i += 2)
          next.push_back(merge_sorted(std::move(gathered[i]), std::move(gathered[i + 1])));
        if (gathered.size() % 2 == 1) next.push_back(std::move(gathered.back()));
        gathered = std::move(next);
      }
      merged = std::move(gathered.front());
    } else {
      merged = std::move(gathered.front());
      for (std::size_t i = 1; i < gathered.size(); ++i)
        merged = merge_sorted(std::move(merged), std::move(gathered[i]));
    }
  } else {
    merged.reserve(view.size());
    for (auto& g : gathered)
      for (auto& e : g) merged.push_back(std::move(e));
    std::sort(merged.begin(), merged.end(), beam_less);
  }
  if (log) log->record(iteration, kHeadWorker, SectionLabel::Sorted, sort_watch.seconds());
  return merged;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> frame, std::size_t& pos) {
  if (pos + sizeof(T) > frame.size()) throw std::invalid_argument("truncated message frame");
  T v;
  std::memcpy(&v, frame.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::uint64_t encoded_entries_size(std::size_t count, std::size_t n_pairs) {
  return 4 + static_cast<std::uint64_t>(count) * (8 + 2 + 16 * static_cast<std::uint64_t>(n_pairs));
}

std::vector<std::uint8_t> encode_entries(std::span<const BeamEntry> entries) {
  std::vector<std::uint8_t> buf;
  if (entries.size() > 0xffffffffu) throw std::invalid_argument("too many entries for a frame");
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(entries.size()));
  for (const BeamEntry& e : entries) {
    if (e.dihedrals.size() > 0xffffu)
      throw std::invalid_argument("entry too long for the frame format");
    put<double>(buf, e.score);
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(e.dihedrals.size()));
    for (const DihedralPair& d : e.dihedrals) {
      put<double>(buf, d.phi);
      put<double>(buf, d.psi);
    }
  }
  return buf;
}

std::vector<BeamEntry> decode_entries(std::span<const std::uint8_t> frame) {
  std::size_t pos = 0;
  const auto count = take<std::uint32_t>(frame, pos);
  std::vector<BeamEntry> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    BeamEntry e;
    e.score = take<double>(frame, pos);
    const auto n = take<std::uint16_t>(frame, pos);
    e.dihedrals.reserve(n);
    for (std::uint16_t j = 0; j < n; ++j) {
      // Bypass the normalizing constructor: a codec must reproduce the
      // encoded bytes exactly.
      DihedralPair d;
      d.phi = take<double>(frame, pos);
      d.psi = take<double>(frame, pos);
      e.dihedrals.push_back(d);
    }
    out.push_back(std::move(e));
  }
  if (pos != frame.size()) throw std::invalid_argument("trailing bytes in message frame");
  return out;
}

std::uint64_t encoded_results_size(std::size_t count) {
  return 4 + static_cast<std::uint64_t>(count) * 16;
}

std::vector<std::uint8_t> encode_results(std::span<const ScoredIndex> results) {
  std::vector<std::uint8_t> buf;
  if (results.size() > 0xffffffffu) throw std::invalid_argument("too many results for a frame");
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(results.size()));
  for (const ScoredIndex& r : results) {
    put<double>(buf, r.first);
    put<std::uint64_t>(buf, r.second);
  }
  return buf;
}

std::vector<ScoredIndex> decode_results(std::span<const std::uint8_t> frame) {
  std::size_t pos = 0;
  const auto count = take<std::uint32_t>(frame, pos);
  std::vector<ScoredIndex> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    double score = take<double>(frame, pos);
    auto index = take<std::uint64_t>(frame, pos);
    out.emplace_back(score, index);
  }
  if (pos != frame.size()) throw std::invalid_argument("trailing bytes in message frame");
  return out;
}

}  // namespace rdcfold
