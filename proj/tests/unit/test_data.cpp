#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <vector>

#include <gtest/gtest.h>

#include "blindsr/core/hash.hpp"
#include "blindsr/core/image_io.hpp"
#include "blindsr/core/tensor_file.hpp"
#include "blindsr/data/corpus.hpp"
#include "blindsr/data/pairs.hpp"
#include "blindsr/data/textures.hpp"
#include "blindsr/degrade/resize.hpp"

using namespace blindsr;
using namespace blindsr::data;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("blindsr_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ImageTensor texture(std::uint64_t seed, int h, int w, int c = 3) {
  Prng p(seed);
  return synth_texture(p, h, w, c);
}

// Rounds through 8 bits so that the in-memory image equals what a PNG stores.
ImageTensor quantized(const ImageTensor& img) {
  ImageTensor q = img;
  for (float& v : q.values()) v = from_byte(to_byte(v));
  return q;
}

std::string json_of(const degrade::DegradationTrace& t) { return nlohmann::json(t).dump(); }

}  // namespace

TEST(Profile, NamedProfilesAndValidation) {
  const ScaleProfile desk = profile_by_name("desk");
  EXPECT_EQ(desk.hr_crop, 96);
  EXPECT_EQ(desk.lr_size, 24);
  EXPECT_EQ(desk.model_crop, 64);
  const ScaleProfile paper = profile_by_name("paper");
  EXPECT_EQ(paper.hr_crop, 400);
  EXPECT_EQ(paper.lr_size, 100);
  EXPECT_EQ(paper.model_crop, 256);
  EXPECT_EQ(profile_by_name("mini").eval_lr(), 8);
  EXPECT_THROW(profile_by_name("huge"), InvalidArgument);
  EXPECT_THROW((ScaleProfile{"x", 96, 20, 64}.validate()), InvalidArgument);
  EXPECT_THROW((ScaleProfile{"x", 96, 24, 128}.validate()), InvalidArgument);
  EXPECT_THROW((ScaleProfile{"x", 96, 24, 62}.validate()), InvalidArgument);
  EXPECT_EQ(nlohmann::json(paper).get<ScaleProfile>().model_crop, 256);
}

TEST(Textures, DeterministicAndInRange) {
  const ImageTensor a = texture(3, 40, 56), b = texture(3, 40, 56), c = texture(4, 40, 56);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  double lo = 1, hi = 0;
  for (float v : a.values()) {
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_GT(hi - lo, 0.2);
  EXPECT_EQ(texture(5, 16, 16, 1).channels(), 1);
  Prng p(1);
  EXPECT_THROW(synth_texture(p, 16, 16, 2), InvalidArgument);
}

TEST(Ingest, RecordsErrorsAndSmallImages) {
  TempDir dir;
  write_image(dir.path() / "a.png", texture(1, 64, 64));
  write_image(dir.path() / "b.png", texture(2, 80, 72));
  write_image(dir.path() / "small.png", texture(3, 40, 64));
  {
    std::ofstream(dir.path() / "broken.png") << "not a png";
    std::ofstream(dir.path() / "notes.txt") << "ignored";
  }
  const DatasetManifest m = ingest(dir.path(), profile_by_name("mini"));
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].path, "a.png");
  EXPECT_EQ(m.entries[1].height, 80);
  EXPECT_EQ(m.entries[1].width, 72);
  EXPECT_EQ(m.entries[0].sha256, sha256_hex(blindsr::detail::read_file_bytes(dir.path() / "a.png")));
  EXPECT_EQ(m.skipped_small, 1);
  ASSERT_EQ(m.errors.size(), 1u);
  EXPECT_EQ(m.errors[0].path, "broken.png");
  EXPECT_FALSE(m.paired);

  // The eval split only needs model_crop, so the 40-row image qualifies.
  EXPECT_EQ(ingest(dir.path(), profile_by_name("mini"), Split::eval).entries.size(), 3u);

  const DatasetManifest back = nlohmann::json(m).get<DatasetManifest>();
  EXPECT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[0].sha256, m.entries[0].sha256);
  EXPECT_EQ(back.errors.size(), 1u);
  EXPECT_EQ(back.skipped_small, 1);
}

TEST(Ingest, EmptyOrMissingDirectory) {
  TempDir dir;
  EXPECT_THROW(ingest(dir.path(), profile_by_name("mini")), EmptyCorpusError);
  write_image(dir.path() / "tiny.png", texture(1, 16, 16));
  EXPECT_THROW(ingest(dir.path(), profile_by_name("mini")), EmptyCorpusError);
  EXPECT_THROW(ingest(dir.path() / "nope", profile_by_name("mini")), InvalidArgument);
}

TEST(Ingest, PairedCorpus) {
  TempDir dir;
  fs::create_directories(dir.path() / "hr");
  fs::create_directories(dir.path() / "lr");
  write_image(dir.path() / "hr" / "x.png", texture(1, 64, 64));
  write_image(dir.path() / "lr" / "x.png", texture(2, 16, 16));
  write_image(dir.path() / "hr" / "lonely.png", texture(3, 64, 64));
  write_image(dir.path() / "hr" / "odd.png", texture(4, 64, 64));
  write_image(dir.path() / "lr" / "odd.png", texture(5, 20, 16));
  const DatasetManifest m = ingest(dir.path(), profile_by_name("mini"), Split::eval);
  EXPECT_TRUE(m.paired);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].path, "hr/x.png");
  EXPECT_EQ(m.entries[0].lr_path, "lr/x.png");
  EXPECT_EQ(m.errors.size(), 2u);
}

TEST(TrainingPair, CleanPathIsBicubicRoundTrip) {
  const ScaleProfile prof = profile_by_name("mini");
  const ImageTensor img = texture(6, 70, 90);
  PairOptions opts;
  opts.use_degradations = false;
  Prng p(2);
  const TrainingSample s = make_training_pair(img, p, prof, opts);
  EXPECT_FALSE(s.trace);
  const ImageTensor crop = img.crop(s.crop_y, s.crop_x, 48, 48);
  EXPECT_EQ(s.pair.x, crop.center_crop(32, 32));
  const ImageTensor up = degrade::bicubic_upsample(degrade::bicubic_downsample(crop, 4), 4);
  EXPECT_EQ(s.pair.c, up.center_crop(32, 32));
  EXPECT_LE(s.crop_y, 70 - 48);
  EXPECT_LE(s.crop_x, 90 - 48);
}

TEST(TrainingPair, DegradedPathRecordsReplayableTrace) {
  const ScaleProfile prof = profile_by_name("mini");
  const ImageTensor img = texture(7, 48, 48);
  Prng p(3);
  const TrainingSample s = make_training_pair(img, p, prof);
  ASSERT_TRUE(s.trace);
  EXPECT_EQ(s.pair.x.height(), 32);
  EXPECT_EQ(s.pair.c.width(), 32);
  Prng q(99);
  const TrainingSample r = make_training_pair(img, q, prof, {}, &*s.trace);
  EXPECT_EQ(r.pair.c, s.pair.c);
  Prng small(1);
  EXPECT_THROW(make_training_pair(texture(1, 40, 48), small, prof), InvalidArgument);
}

TEST(TrainingPool, DeterministicCyclesImages) {
  const ScaleProfile prof = profile_by_name("mini");
  const std::vector<ImageTensor> imgs{texture(1, 48, 48), texture(2, 48, 48)};
  const Prng root(5);
  PairOptions opts;
  opts.use_degradations = false;
  const auto a = make_training_pool(imgs, 5, root, prof, opts);
  const auto b = make_training_pool(imgs, 5, root, prof, opts);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].c, b[i].c);
    // 48^2 images leave no room for a random crop, so pair i is a function of image i mod 2.
    EXPECT_EQ(a[i].x, a[i % 2].x);
  }
  EXPECT_FALSE(a[0].x == a[1].x);
  EXPECT_THROW(make_training_pool({}, 3, root, prof), EmptyCorpusError);
}

TEST(EvalSet, SynthesisedPairsAlignWithSource) {
  TempDir dir;
  const ImageTensor img = quantized(texture(8, 64, 80));
  write_image(dir.path() / "s.png", img);
  const DatasetManifest m = ingest(dir.path(), profile_by_name("mini"), Split::eval);
  const auto pairs = build_eval_set(m, Prng(4), 3);
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) {
    EXPECT_EQ(p.crop_y % 4, 0);
    EXPECT_EQ(p.crop_x % 4, 0);
    EXPECT_EQ(p.hr, img.crop(p.crop_y, p.crop_x, 32, 32));
    EXPECT_EQ(p.lr.height(), 8);
    ASSERT_TRUE(p.trace);
    EXPECT_EQ(p.lr, degrade::apply_trace(p.hr, *p.trace));
    EXPECT_EQ(p.source_id, "s.png");
  }
  const auto again = build_eval_set(m, Prng(4), 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(again[k].lr, pairs[k].lr);
  EXPECT_THROW(build_eval_set(m, Prng(4), 0), InvalidArgument);

  PairOptions clean;
  clean.use_degradations = false;
  const auto bic = build_eval_set(m, Prng(4), 1, clean);
  EXPECT_FALSE(bic[0].trace);
  EXPECT_EQ(bic[0].lr, degrade::bicubic_downsample(bic[0].hr, 4));
  EXPECT_EQ(upsampled_conditioning(bic)[0].height(), 32);
  EXPECT_EQ(hr_images(bic)[0], bic[0].hr);
}

TEST(EvalSet, PairedCropsUseMatchingCoordinates) {
  TempDir dir;
  fs::create_directories(dir.path() / "hr");
  fs::create_directories(dir.path() / "lr");
  const ImageTensor hr = quantized(texture(1, 64, 64)), lr = quantized(texture(2, 16, 16));
  write_image(dir.path() / "hr" / "p.png", hr);
  write_image(dir.path() / "lr" / "p.png", lr);
  const DatasetManifest m = ingest(dir.path(), profile_by_name("mini"), Split::eval);
  for (const auto& p : build_eval_set(m, Prng(9), 4)) {
    EXPECT_EQ(p.hr, hr.crop(p.crop_y, p.crop_x, 32, 32));
    EXPECT_EQ(p.lr, lr.crop(p.crop_y / 4, p.crop_x / 4, 8, 8));
    EXPECT_FALSE(p.trace);
  }
}

TEST(EvalSet, SaveLoadRoundTrip) {
  TempDir src, out;
  write_image(src.path() / "a.png", texture(1, 64, 64));
  const DatasetManifest m = ingest(src.path(), profile_by_name("mini"), Split::eval);
  const auto pairs = build_eval_set(m, Prng(1), 2);
  save_eval_set(out.path() / "set", pairs, {{"seed", 1}});
  const auto back = load_eval_set(out.path() / "set");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].lr, pairs[i].lr);
    EXPECT_EQ(back[i].hr, pairs[i].hr);
    EXPECT_EQ(back[i].crop_x, pairs[i].crop_x);
    EXPECT_EQ(back[i].source_id, pairs[i].source_id);
    ASSERT_TRUE(back[i].trace);
    EXPECT_EQ(json_of(*back[i].trace), json_of(*pairs[i].trace));
  }
  EXPECT_THROW(load_eval_set(out.path() / "missing"), InvalidArgument);
  std::ofstream(out.path() / "set" / "index.json") << "{ broken";
  EXPECT_THROW(load_eval_set(out.path() / "set"), ParseError);
}
