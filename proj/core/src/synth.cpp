#include "ctl/synth.hpp"

#include <cmath>
#include <random>

#include "ctl/tensor_io.hpp"

namespace ctl {
namespace {

constexpr Magic kDataMagic{'C', 'T', 'L', 'D'};
constexpr std::uint32_t kDataVersion = 1;
constexpr double kBumpSigma = 0.6;
constexpr double kHeatmapGain = 6.0;

struct Camera {
  std::vector<double> mix;   // [C, C], I + distortion * R / sqrt(C)
  std::vector<double> bias;  // [C]
};

Camera make_camera(std::size_t c, double distortion, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Camera cam{std::vector<double>(c * c), std::vector<double>(c)};
  const double s = distortion / std::sqrt(static_cast<double>(c));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) cam.mix[i * c + j] = (i == j ? 1.0 : 0.0) + s * normal(rng);
  for (auto& b : cam.bias) b = distortion * normal(rng);
  return cam;
}

struct Identity {
  std::vector<double> signature;                     // [17, C]
  std::vector<std::pair<double, double>> pose;       // per key-point
};

// Writes one clip of T frames at frame offset `first` into the stacked buffers.
void render_clip(const SynthSpec& spec, const Identity& id, const Camera& cam, std::mt19937_64& rng,
                 std::vector<float>& features, std::vector<float>& heatmaps, std::size_t first) {
  const std::size_t t_n = spec.frames, h_n = spec.height, w_n = spec.width, c_n = spec.channels;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution occluded(spec.occlusion);
  const double dy = spec.jitter * normal(rng), dx = spec.jitter * normal(rng);
  std::vector<double> raw(h_n * w_n * c_n);
  for (std::size_t t = 0; t < t_n; ++t) {
    std::fill(raw.begin(), raw.end(), 0.0);
    const std::size_t frame = first + t;
    for (std::size_t k = 0; k < kKeypoints; ++k) {
      const double y = id.pose[k].first + dy + 0.5 * spec.jitter * normal(rng);
      const double x = id.pose[k].second + dx + 0.5 * spec.jitter * normal(rng);
      const bool hidden = occluded(rng);
      for (std::size_t h = 0; h < h_n; ++h)
        for (std::size_t w = 0; w < w_n; ++w) {
          const double d2 = (h - y) * (h - y) + (w - x) * (w - x);
          const double bump = std::exp(-d2 / (2 * kBumpSigma * kBumpSigma));
          heatmaps[((frame * kKeypoints + k) * h_n + h) * w_n + w] =
              hidden ? 0.0f : static_cast<float>(kHeatmapGain * bump);
          if (hidden) continue;
          double* px = &raw[(h * w_n + w) * c_n];
          const double* sig = &id.signature[k * c_n];
          for (std::size_t c = 0; c < c_n; ++c) px[c] += bump * sig[c];
        }
    }
    for (std::size_t p = 0; p < h_n * w_n; ++p) {
      const double* px = &raw[p * c_n];
      float* out = &features[(frame * h_n * w_n + p) * c_n];
      for (std::size_t j = 0; j < c_n; ++j) {
        double v = cam.bias[j];
        for (std::size_t i = 0; i < c_n; ++i) v += px[i] * cam.mix[i * c_n + j];
        out[j] = static_cast<float>(v + spec.noise * normal(rng));
      }
    }
  }
}

ClipSet render_split(const SynthSpec& spec, const std::vector<Identity>& ids, int label_offset,
                     const std::vector<Camera>& cams, std::mt19937_64& rng) {
  const std::size_t clips = ids.size() * spec.cameras * spec.clips_per_camera;
  const std::size_t frames = clips * spec.frames;
  std::vector<float> features(frames * spec.height * spec.width * spec.channels);
  std::vector<float> heatmaps(frames * kKeypoints * spec.height * spec.width);
  ClipSet set;
  set.frames = spec.frames;
  std::size_t clip = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t cam = 0; cam < spec.cameras; ++cam)
      for (std::size_t r = 0; r < spec.clips_per_camera; ++r) {
        render_clip(spec, ids[i], cams[cam], rng, features, heatmaps, clip * spec.frames);
        set.labels.push_back(label_offset + static_cast<int>(i));
        set.cameras.push_back(static_cast<int>(cam));
        ++clip;
      }
  set.features = Tensorf(Shape{frames, spec.height, spec.width, spec.channels}, std::move(features));
  set.heatmaps = Tensorf(Shape{frames, kKeypoints, spec.height, spec.width}, std::move(heatmaps));
  return set;
}

std::vector<TensorRecord> split_records(const ClipSet& set, const SynthSpec& spec) {
  std::vector<TensorRecord> out;
  out.push_back(text_record("meta.spec", canonical_synth_spec(spec)));
  out.push_back(to_record("features", set.features));
  out.push_back(to_record("heatmaps", set.heatmaps));
  TensorRecord labels{"labels", Shape{set.size()}, {}}, cams{"cameras", Shape{set.size()}, {}};
  for (std::size_t i = 0; i < set.size(); ++i) {
    labels.data.push_back(static_cast<float>(set.labels[i]));
    cams.data.push_back(static_cast<float>(set.cameras[i]));
  }
  out.push_back(std::move(labels));
  out.push_back(std::move(cams));
  return out;
}

ClipSet split_from_records(const std::vector<TensorRecord>& records, const SynthSpec& spec) {
  ClipSet set;
  set.frames = spec.frames;
  const auto& f = find_record(records, "features");
  const auto& h = find_record(records, "heatmaps");
  const auto& l = find_record(records, "labels");
  const auto& c = find_record(records, "cameras");
  if (l.data.size() != c.data.size() || f.shape.rank() != 4 || h.shape.rank() != 4 ||
      f.shape[0] != l.data.size() * spec.frames || h.shape[0] != f.shape[0] || f.shape[3] != spec.channels) {
    throw FormatError("dataset tensors are inconsistent with their spec");
  }
  set.features = Tensorf(f.shape, f.data);
  set.heatmaps = Tensorf(h.shape, h.data);
  for (float v : l.data) set.labels.push_back(static_cast<int>(v));
  for (float v : c.data) set.cameras.push_back(static_cast<int>(v));
  return set;
}

}  // namespace

ClipSet ClipSet::select(const std::vector<std::size_t>& clips) const {
  ClipSet out;
  out.frames = frames;
  const auto& fs = features.shape();
  const auto& hs = heatmaps.shape();
  const std::size_t f_stride = frames * fs[1] * fs[2] * fs[3];
  const std::size_t h_stride = frames * hs[1] * hs[2] * hs[3];
  std::vector<float> f, h;
  f.reserve(clips.size() * f_stride);
  h.reserve(clips.size() * h_stride);
  const auto fd = features.data();
  const auto hd = heatmaps.data();
  for (auto i : clips) {
    if (i >= size()) throw std::out_of_range("clip index " + std::to_string(i) + " out of range");
    f.insert(f.end(), fd.begin() + i * f_stride, fd.begin() + (i + 1) * f_stride);
    h.insert(h.end(), hd.begin() + i * h_stride, hd.begin() + (i + 1) * h_stride);
    out.labels.push_back(labels[i]);
    out.cameras.push_back(cameras[i]);
  }
  out.features = Tensorf(Shape{clips.size() * frames, fs[1], fs[2], fs[3]}, std::move(f));
  out.heatmaps = Tensorf(Shape{clips.size() * frames, hs[1], hs[2], hs[3]}, std::move(h));
  return out;
}

std::vector<std::pair<double, double>> canonical_pose(std::size_t height, std::size_t width) {
  // Fractions of the grid: rows top to bottom, columns left to right.
  static const double rows[kKeypoints] = {0.06, 0.03, 0.03, 0.06, 0.06, 0.22, 0.22, 0.38, 0.38,
                                          0.52, 0.52, 0.55, 0.55, 0.74, 0.74, 0.94, 0.94};
  static const double cols[kKeypoints] = {0.5,  0.4,  0.6,  0.3,  0.7,  0.2,  0.8,  0.1, 0.9,
                                          0.05, 0.95, 0.35, 0.65, 0.35, 0.65, 0.35, 0.65};
  std::vector<std::pair<double, double>> pose;
  for (std::size_t k = 0; k < kKeypoints; ++k) {
    pose.emplace_back(rows[k] * static_cast<double>(height - 1), cols[k] * static_cast<double>(width - 1));
  }
  return pose;
}

Dataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto base = canonical_pose(spec.height, spec.width);

  std::vector<Identity> ids(spec.identities + spec.test_identities);
  for (auto& id : ids) {
    id.signature.resize(kKeypoints * spec.channels);
    for (auto& v : id.signature) v = normal(rng);
    id.pose = base;
    for (auto& [y, x] : id.pose) {
      y += 0.25 * normal(rng);
      x += 0.25 * normal(rng);
    }
  }
  std::vector<Camera> cams;
  for (std::size_t c = 0; c < spec.cameras; ++c) cams.push_back(make_camera(spec.channels, spec.distortion, rng));

  Dataset data;
  data.spec = spec;
  const std::vector<Identity> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(spec.identities));
  const std::vector<Identity> test_ids(ids.begin() + static_cast<std::ptrdiff_t>(spec.identities), ids.end());
  data.train = render_split(spec, train_ids, 0, cams, rng);
  data.test = render_split(spec, test_ids, static_cast<int>(spec.identities), cams, rng);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tensor_table_file(dir / "train.bin", kDataMagic, kDataVersion, split_records(data.train, data.spec));
  write_tensor_table_file(dir / "test.bin", kDataMagic, kDataVersion, split_records(data.test, data.spec));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  const auto train = read_tensor_table_file(dir / "train.bin", kDataMagic, kDataVersion);
  const auto test = read_tensor_table_file(dir / "test.bin", kDataMagic, kDataVersion);
  data.spec = parse_synth_spec(record_text(find_record(train, "meta.spec")));
  if (record_text(find_record(test, "meta.spec")) != canonical_synth_spec(data.spec)) {
    throw FormatError("train and test splits in " + dir.string() + " come from different specs");
  }
  data.train = split_from_records(train, data.spec);
  data.test = split_from_records(test, data.spec);
  return data;
}

}  // namespace ctl
