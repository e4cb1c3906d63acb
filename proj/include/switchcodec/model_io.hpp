#pragma once

// Binary file formats, all little-endian.
//
// Model (".rvqm"):
//   "RVQM" | u32 version | u32 D | u32 N_r | u32 K_r | u32 n_shared | u32 C
//   | u32 window_frames | u32 flags (bit 0 normalized distance, bit 1 fixed mode)
//   | n_shared + N_r RVQC codebook blocks (shared first)
//   | gate: u32 N_r | u32 K_r | D*N_r f32 W (row-major) | N_r f32 bias
//
// Latents: u32 D | u32 T_total | D*T_total f32, row-major (one row per latent
// dimension).
//
// Tier dump: u32 f | u32 p | u32 T_s | rows of 2*T_s f32 (magnitude frames then
// phase frames), tier-major: tier 0 rows 0, p, 2p, ... first.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "switchcodec/spectral.hpp"
#include "switchcodec/trainer.hpp"

namespace switchcodec {

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
// Loads counters start at zero; bias and weights are restored.
Model deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

std::vector<std::uint8_t> serialize_latents(const Matrix& latents);
Matrix deserialize_latents(std::span<const std::uint8_t> bytes);
void save_latents(const std::string& path, const Matrix& latents);
Matrix load_latents(const std::string& path);

// Headerless little-endian float32 samples.
std::vector<double> load_raw_audio(const std::string& path);

// Serializes an mtsd_input tensor built with ConcatMode::kTime.
std::vector<std::uint8_t> serialize_tier_dump(const TierSpec& spec, const Tensor3& input);

}  // namespace switchcodec
