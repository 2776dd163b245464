// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <utility>

namespace dw2 {

// Frame id reserved for control messages that bypass frame filtering.
inline constexpr uint32_t kControlFrameId = 0xffffffffu;

/// Locking producer-consumer queue keyed by frame id. Items with equal
/// frame id are delivered FIFO; there is no ordering guarantee across
/// frame ids. Consumers may filter by frame id (or an arbitrary predicate);
/// non-matching items stay queued in order. The queue is unbounded:
/// backpressure is enforced by the frames-in-flight protocol, not here.
///
/// Closing wakes every blocked consumer. Pops drain matching items that
/// are already queued, then report end-of-stream (nullopt).
template <typename T>
class TimestampedMailbox {
 public:
  using Entry = std::pair<uint32_t, T>;

  /// Enqueue under a frame id. Returns false (item dropped) if closed.
  bool post(uint32_t frame_id, T item) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (closed_)
        return false;
      queue_.emplace_back(frame_id, std::move(item));
    }
    cv_.notify_all();
    return true;
  }

  /// Oldest item regardless of frame id. Blocks; nullopt = closed and empty.
  std::optional<Entry> pop_any() {
    return pop_matching([](uint32_t) { return true; });
  }

  /// pop_any with a deadline. nullopt on timeout or end-of-stream;
  /// closed() disambiguates if the caller needs to.
  std::optional<Entry> pop_any_for(std::chrono::milliseconds timeout) {
    return pop_matching_for([](uint32_t) { return true; }, timeout);
  }

  /// Oldest item with the given frame id; other items stay queued in order.
  /// Blocks until a match exists; nullopt once closed with no match queued.
  std::optional<T> pop_for_frame(uint32_t frame_id) {
    auto e = pop_matching([frame_id](uint32_t fid) { return fid == frame_id; });
    if (!e)
      return std::nullopt;
    return std::move(e->second);
  }

  /// Oldest item whose frame id satisfies pred. The predicate is re-evaluated
  /// after every post and every notify_all(), so it may read shared state
  /// (e.g. an atomic current-frame counter).
  template <typename Pred>
  std::optional<Entry> pop_matching(Pred pred) {
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
      if (auto e = take_first(pred))
        return e;
      if (closed_)
        return std::nullopt;
      cv_.wait(lock);
    }
  }

  template <typename Pred>
  std::optional<Entry> pop_matching_for(Pred pred, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
      if (auto e = take_first(pred))
        return e;
      if (closed_)
        return std::nullopt;
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
        auto e = take_first(pred);
        return e;  // last chance; nullopt = timed out
      }
    }
  }

  /// Reject further posts and wake all blocked consumers. Queued items
  /// remain poppable (drain semantics). Idempotent.
  void close() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  /// Wake blocked consumers so predicates over external state get re-checked.
  void notify_all() { cv_.notify_all(); }

  bool closed() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return closed_;
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return queue_.size();
  }

 private:
  template <typename Pred>
  std::optional<Entry> take_first(Pred& pred) {
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
      if (pred(it->first)) {
        Entry e = std::move(*it);
        queue_.erase(it);
        return e;
      }
    }
    return std::nullopt;
  }

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Entry> queue_;
  bool closed_ = false;
};

}  // namespace dw2
