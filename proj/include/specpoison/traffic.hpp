#pragma once

#include <cstdint>
#include <vector>

#include "rng.hpp"

namespace specpoison {

enum class ChannelState : std::uint8_t { idle = 0, busy = 1 };

/// Background transmitter with Bernoulli arrivals and an unbounded queue. Once
/// active it sends one packet per slot until the queue drains.
struct BackgroundSource {
  long queue_length = 0;
  bool active = false;
  double arrival_rate = 0.8;
  double activation_probability = 0.2;

  bool operator==(const BackgroundSource&) const = default;
};

/// Advances one slot. Order: arrival, then activation, then service. Returns
/// whether the source transmits in this slot.
inline bool step(BackgroundSource& s, RngStream& rng) {
  // Both draws happen every slot so the stream stays aligned with slot index.
  const bool arrival = bernoulli(rng, s.arrival_rate);
  const bool activation = bernoulli(rng, s.activation_probability);
  if (arrival) ++s.queue_length;
  if (!s.active && s.queue_length > 0 && activation) s.active = true;
  if (!s.active) return false;
  --s.queue_length;
  if (s.queue_length == 0) s.active = false;
  return true;
}

struct SlotStatus {
  ChannelState state = ChannelState::idle;
  std::vector<bool> transmitting;  // one flag per source

  bool busy() const { return state == ChannelState::busy; }
};

/// Steps every source; the slot is busy iff any source transmits.
inline SlotStatus channel_status(std::vector<BackgroundSource>& sources, RngStream& rng) {
  SlotStatus out;
  out.transmitting.reserve(sources.size());
  bool any = false;
  for (auto& s : sources) {
    const bool tx = step(s, rng);
    out.transmitting.push_back(tx);
    any = any || tx;
  }
  out.state = any ? ChannelState::busy : ChannelState::idle;
  return out;
}

}  // namespace specpoison
