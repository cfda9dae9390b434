#pragma once

#include <string>

#include "specklediff/trainer.hpp"

namespace specklediff {

// Checkpoint archive layout:
//   bytes 0..7   magic "SDCKPT01"
//   bytes 8..15  manifest length N, unsigned 64-bit little-endian
//   next N bytes JSON manifest (UTF-8)
//   payload      arrays back to back, little-endian, at the offsets the
//                manifest lists (relative to the start of the payload)
// The manifest holds "network", "train", "schedule", "adam", "epoch", "step",
// "seed" and "arrays": [{"name", "shape", "dtype", "offset", "nbytes"}].
// Array names are "param/<name>", "adam.m/<name>", "adam.v/<name>" (float32)
// and "schedule/betas" (float64).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json network_to_json(const NetworkConfig& c);
NetworkConfig network_from_json(const nlohmann::json& j);

}  // namespace specklediff
