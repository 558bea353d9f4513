#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/hash.hpp"
#include "blindsr/core/tensor_file.hpp"
#include "blindsr/denoiser/train.hpp"
#include "blindsr/denoiser/unet.hpp"

namespace blindsr::denoiser {

/// sha256 of the compact, key-sorted JSON dump.
inline std::string config_hash(const nlohmann::json& config) { return sha256_hex(config.dump()); }

struct Checkpoint {
  UNetConfig unet;
  nlohmann::json config = nlohmann::json::object();  // full run configuration, hashed
  TrainState state;
};

namespace detail {

inline void put_tensors(TensorArchive& ar, const std::string& prefix, const std::map<std::string, nn::Tensor<float>>& ts) {
  for (const auto& [name, t] : ts) {
    ar.arrays.push_back({prefix + name, std::vector<std::int64_t>(t.shape.begin(), t.shape.end()), prefix, t.data});
  }
}

inline nn::Tensor<float> to_tensor(const NamedArray& a) {
  return nn::Tensor<float>(std::vector<int>(a.dims.begin(), a.dims.end()), a.values);
}

}  // namespace detail

inline TensorArchive encode_checkpoint(const Checkpoint& ck) {
  TensorArchive ar;
  ar.meta["kind"] = "denoiser_checkpoint";
  ar.meta["unet"] = ck.unet;
  ar.meta["config"] = ck.config;
  ar.meta["config_hash"] = config_hash(ck.config);
  ar.meta["step"] = ck.state.step;
  ar.meta["optimizer_step"] = ck.state.optimizer.step_count();
  ar.meta["parameter_count"] = ck.state.params.parameter_count();
  std::map<std::string, nn::Tensor<float>> params;
  for (const auto& [name, e] : ck.state.params.entries()) params.emplace(name, e.value);
  detail::put_tensors(ar, "param/", params);
  detail::put_tensors(ar, "adam.m/", ck.state.optimizer.first_moments());
  detail::put_tensors(ar, "adam.v/", ck.state.optimizer.second_moments());
  return ar;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_archive(path, encode_checkpoint(ck));
}

/// Loads a checkpoint and verifies that the stored configuration still hashes
/// to the recorded value and that the parameters match the declared UNet.
inline Checkpoint decode_checkpoint(const TensorArchive& ar, const nn::AdamConfig& adam = {}) {
  if (ar.meta.value("kind", "") != "denoiser_checkpoint") {
    throw ParseError(ParseErrorKind::malformed_header, "not a denoiser checkpoint");
  }
  Checkpoint ck;
  try {
    ck.unet = ar.meta.at("unet").get<UNetConfig>();
    ck.config = ar.meta.at("config");
    if (config_hash(ck.config) != ar.meta.at("config_hash").get<std::string>()) {
      throw ParseError(ParseErrorKind::malformed_header, "checkpoint config hash mismatch");
    }
    ck.state.step = ar.meta.at("step").get<std::int64_t>();
    ck.state.optimizer = nn::Adam<float>(adam);
    ck.state.optimizer.set_step_count(ar.meta.at("optimizer_step").get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::malformed_header, std::string("checkpoint meta: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(ParseErrorKind::malformed_header, std::string("checkpoint meta: ") + e.what());
  }

  Prng scratch(0);
  const nn::ParamStore<float> layout = init_params<float>(scratch, ck.unet);
  for (const auto& a : ar.arrays) {
    const auto slash = a.name.find('/');
    const std::string prefix = a.name.substr(0, slash + 1);
    const std::string name = a.name.substr(slash + 1);
    if (!layout.contains(name)) throw ParseError(ParseErrorKind::dimension_mismatch, "unexpected array " + a.name);
    nn::Tensor<float> t = detail::to_tensor(a);
    if (t.shape != layout.entry(name).value.shape) {
      throw ParseError(ParseErrorKind::dimension_mismatch, "shape mismatch for " + a.name);
    }
    if (prefix == "param/") {
      ck.state.params.add(name, std::move(t));
    } else if (prefix == "adam.m/") {
      ck.state.optimizer.first_moments().emplace(name, std::move(t));
    } else if (prefix == "adam.v/") {
      ck.state.optimizer.second_moments().emplace(name, std::move(t));
    } else {
      throw ParseError(ParseErrorKind::malformed_header, "unknown array " + a.name);
    }
  }
  if (ck.state.params.entries().size() != layout.entries().size()) {
    throw ParseError(ParseErrorKind::dimension_mismatch, "checkpoint is missing parameters");
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const nn::AdamConfig& adam = {}) {
  return decode_checkpoint(read_archive(path), adam);
}

}  // namespace blindsr::denoiser
