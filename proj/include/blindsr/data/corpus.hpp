#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindsr/core/error.hpp"
#include "blindsr/core/hash.hpp"
#include "blindsr/core/image.hpp"
#include "blindsr/core/image_io.hpp"
#include "blindsr/core/parallel.hpp"
#include "blindsr/core/tensor_file.hpp"

namespace blindsr::data {

namespace fs = std::filesystem;

/// Crop sizes for one experiment scale: HR training crop, its LR size, and
/// the model crop taken from the centre of the HR crop and of the upsampled LR.
struct ScaleProfile {
  std::string name = "desk";
  int hr_crop = 96;
  int lr_size = 24;
  int model_crop = 64;

  static constexpr int kMagnification = 4;

  void validate() const {
    if (hr_crop != kMagnification * lr_size) throw InvalidArgument("profile: hr_crop must equal 4 x lr_size");
    if (model_crop <= 0 || model_crop > hr_crop) throw InvalidArgument("profile: model_crop must be in (0, hr_crop]");
    if (hr_crop % 4 != 0 || lr_size % 4 != 0 || model_crop % 4 != 0) {
      throw InvalidArgument("profile: all sizes must be divisible by 4");
    }
  }

  int eval_hr() const { return model_crop; }
  int eval_lr() const { return model_crop / kMagnification; }
};

/// Named profiles: "desk" (96/24/64), "paper" (400/100/256) and "mini"
/// (48/12/32), the smallest size the degradation pipeline accepts.
inline ScaleProfile profile_by_name(const std::string& name) {
  if (name == "desk") return {"desk", 96, 24, 64};
  if (name == "paper") return {"paper", 400, 100, 256};
  if (name == "mini") return {"mini", 48, 12, 32};
  throw InvalidArgument("unknown scale profile '" + name + "' (expected desk, paper or mini)");
}

inline void to_json(nlohmann::json& j, const ScaleProfile& p) {
  j = {{"name", p.name}, {"hr_crop", p.hr_crop}, {"lr_size", p.lr_size}, {"model_crop", p.model_crop}};
}

inline void from_json(const nlohmann::json& j, ScaleProfile& p) {
  p.name = j.value("name", std::string("custom"));
  p.hr_crop = j.at("hr_crop").get<int>();
  p.lr_size = j.at("lr_size").get<int>();
  p.model_crop = j.at("model_crop").get<int>();
  p.validate();
}

enum class Split { train, eval };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "eval"; }

struct ManifestEntry {
  std::string path;     // relative to the corpus root
  std::string sha256;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::optional<std::string> lr_path;  // paired corpora only
};

struct IngestError {
  std::string path;
  std::string message;
};

struct DatasetManifest {
  std::string root;
  Split split = Split::train;
  ScaleProfile profile;
  bool paired = false;
  std::vector<ManifestEntry> entries;
  std::vector<IngestError> errors;
  int skipped_small = 0;
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = {{"path", e.path}, {"sha256", e.sha256}, {"height", e.height}, {"width", e.width}, {"channels", e.channels}};
  if (e.lr_path) j["lr_path"] = *e.lr_path;
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  e.path = j.at("path").get<std::string>();
  e.sha256 = j.at("sha256").get<std::string>();
  e.height = j.at("height").get<int>();
  e.width = j.at("width").get<int>();
  e.channels = j.at("channels").get<int>();
  if (j.contains("lr_path")) e.lr_path = j.at("lr_path").get<std::string>();
}

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& e : m.errors) errs.push_back({{"path", e.path}, {"message", e.message}});
  j = {{"root", m.root},       {"split", to_string(m.split)}, {"profile", m.profile},
       {"paired", m.paired},   {"entries", m.entries},        {"errors", errs},
       {"skipped_small", m.skipped_small}};
}

inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.root = j.at("root").get<std::string>();
  const std::string split = j.at("split").get<std::string>();
  if (split != "train" && split != "eval") throw InvalidArgument("manifest split must be train or eval");
  m.split = split == "train" ? Split::train : Split::eval;
  m.profile = j.at("profile").get<ScaleProfile>();
  m.paired = j.value("paired", false);
  m.entries = j.at("entries").get<std::vector<ManifestEntry>>();
  m.errors.clear();
  for (const auto& e : j.value("errors", nlohmann::json::array())) {
    m.errors.push_back({e.at("path").get<std::string>(), e.at("message").get<std::string>()});
  }
  m.skipped_small = j.value("skipped_small", 0);
}

namespace detail {

inline std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_path(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

/// Scans `dir` for PNG/PPM/PGM/tensor images. A directory with `hr/` and `lr/`
/// subdirectories is treated as a paired corpus matched by file name.
/// Unreadable files are recorded and skipped; images smaller than the
/// profile's crop (hr_crop for training, model_crop for evaluation) are counted
/// in skipped_small.
inline DatasetManifest ingest(const fs::path& dir, const ScaleProfile& profile, Split split = Split::train) {
  profile.validate();
  if (!fs::is_directory(dir)) throw InvalidArgument("ingest: not a directory: " + dir.string());
  DatasetManifest m;
  m.root = dir.string();
  m.split = split;
  m.profile = profile;
  m.paired = fs::is_directory(dir / "hr") && fs::is_directory(dir / "lr");
  const fs::path hr_dir = m.paired ? dir / "hr" : dir;
  const std::vector<fs::path> files = detail::list_images(hr_dir);
  const int min_side = split == Split::train ? profile.hr_crop : profile.eval_hr();

  struct Slot {
    std::optional<ManifestEntry> entry;
    std::optional<IngestError> error;
    bool small = false;
  };
  std::vector<Slot> slots(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    const fs::path& f = files[i];
    const std::string rel = fs::relative(f, dir).generic_string();
    Slot& s = slots[i];
    try {
      const std::string bytes = blindsr::detail::read_file_bytes(f);
      const ImageTensor img = read_image(f);
      ManifestEntry e;
      e.path = rel;
      e.sha256 = sha256_hex(bytes);
      e.height = img.height();
      e.width = img.width();
      e.channels = img.channels();
      if (m.paired) {
        const fs::path lr = dir / "lr" / f.filename();
        if (!fs::exists(lr)) throw InvalidArgument("missing LR partner " + lr.string());
        const ImageTensor lr_img = read_image(lr);
        if (lr_img.height() * 4 != img.height() || lr_img.width() * 4 != img.width()) {
          throw InvalidArgument("LR partner is not 1/4 of the HR size");
        }
        e.lr_path = fs::relative(lr, dir).generic_string();
      }
      if (e.height < min_side || e.width < min_side) {
        s.small = true;
      } else {
        s.entry = std::move(e);
      }
    } catch (const std::exception& ex) {
      s.error = IngestError{rel, ex.what()};
    }
  });
  for (auto& s : slots) {
    if (s.entry) m.entries.push_back(std::move(*s.entry));
    if (s.error) m.errors.push_back(std::move(*s.error));
    if (s.small) ++m.skipped_small;
  }
  if (m.entries.empty()) throw EmptyCorpusError("no usable images in " + dir.string());
  return m;
}

inline ImageTensor load_entry(const DatasetManifest& m, const ManifestEntry& e) {
  return read_image(fs::path(m.root) / e.path);
}

}  // namespace blindsr::data
