#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iccn/errors.hpp"
#include "iccn/rng.hpp"
#include "iccn/tensor.hpp"

namespace iccn {

enum class Task { sentiment, emotion4 };

inline const char* task_name(Task t) {
  return t == Task::sentiment ? "sentiment" : "emotion4";
}

inline Task parse_task(const std::string& s) {
  if (s == "sentiment") return Task::sentiment;
  if (s == "emotion4") return Task::emotion4;
  throw ParseError("unknown task '" + s + "'");
}

inline constexpr std::size_t kEmotionCount = 4;
inline constexpr std::array<const char*, kEmotionCount> kEmotionNames{
    "angry", "sad", "happy", "neutral"};

/// One multimodal example: an utterance-level text vector plus audio and
/// video frame sequences.
struct UtteranceRecord {
  std::string id;
  Tensor text;   // d_t
  Tensor audio;  // d_a x l_a
  Tensor video;  // d_v x l_v
  double label = 0.0;                 // sentiment task, in [-3, 3]
  std::vector<double> emotion_labels; // emotion4 task, 0/1 per emotion

  friend bool operator==(const UtteranceRecord&,
                         const UtteranceRecord&) = default;
};

struct Dataset {
  Task task = Task::sentiment;
  std::size_t d_t = 0, d_a = 0, d_v = 0;
  std::size_t l_a = 0, l_v = 0;  // 0 = variable per record
  std::vector<UtteranceRecord> records;

  std::size_t size() const { return records.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Row-mean over frames: (d x l) -> (d).
inline Tensor mean_pool(const Tensor& seq) {
  if (seq.rank() != 2 || seq.dim(1) == 0) {
    throw ContractViolation("mean_pool: expected (d x l) with l >= 1");
  }
  const std::size_t d = seq.dim(0), l = seq.dim(1);
  Tensor out({d});
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < l; ++t) s += seq(i, t);
    out[i] = s / static_cast<double>(l);
  }
  return out;
}

/// Samples-in-columns matrix of one modality over a subset of records.
/// Temporal modalities are mean-pooled to utterance level.
enum class Modality { text, audio, video };

inline Tensor modality_matrix(const Dataset& data,
                              const std::vector<std::size_t>& idx,
                              Modality mod) {
  if (idx.empty()) throw DegenerateInputError("modality_matrix: no records");
  auto vec_of = [&](const UtteranceRecord& r) {
    switch (mod) {
      case Modality::text: return r.text;
      case Modality::audio: return mean_pool(r.audio);
      default: return mean_pool(r.video);
    }
  };
  Tensor first = vec_of(data.records[idx[0]]);
  Tensor out({first.numel(), idx.size()});
  for (std::size_t c = 0; c < idx.size(); ++c) {
    Tensor v = vec_of(data.records[idx[c]]);
    if (v.numel() != first.numel()) {
      throw DataError("modality_matrix: record " + data.records[idx[c]].id +
                      " has inconsistent dims");
    }
    for (std::size_t i = 0; i < v.numel(); ++i) out(i, c) = v[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

/// Controllable shared-latent testbed. The latent splits into three blocks:
///   [0, T)            text-visible; labels read out this block only. Audio
///                     observes the first half, video the second half, so
///                     the label-relevant audio-video common signal is
///                     text-mediated.
///   [T, L - N)        private per-view distractors, split between audio
///                     and video.
///   [L - N, L)        a nuisance block both audio and video observe (at
///                     nuisance_scale amplitude) but text does not - the
///                     shared speaker/recording-style structure that
///                     text-free alignment latches onto.
/// Frames carry per-frame amplitude envelopes; the nonlinear mode routes
/// audio/video through an even map that removes all linear correlation
/// with the latent.
struct SyntheticSpec {
  std::size_t latent_dim = 10;
  std::size_t text_latent_dim = 6;  // latent coords visible to text
  std::size_t nuisance_dim = 2;     // label-irrelevant coords shared by A/V
  double nuisance_scale = 2.0;
  std::size_t d_t = 16, d_a = 6, d_v = 5;
  std::size_t l_a = 8, l_v = 6;
  double noise_text = 0.4;
  double noise_audio = 0.25;
  double noise_video = 0.3;
  bool nonlinear = true;
  std::size_t n_train = 256, n_val = 64, n_test = 64;
  std::uint64_t seed = 0;
  Task task = Task::sentiment;
};

namespace detail {

inline double f32(double x) {  // file precision is float32; quantize up front
  return static_cast<double>(static_cast<float>(x));
}

inline Tensor quantize_f32(Tensor t) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = f32(t[i]);
  return t;
}

struct SyntheticMaps {
  Tensor text_map;    // d_t x latent (zero past text_latent_dim columns)
  Tensor audio_map;   // d_a x latent
  Tensor video_map;   // d_v x latent
  Tensor label_w;     // latent
  Tensor emotion_w;   // kEmotionCount x latent
  std::vector<double> env_a, env_v;
};

// Latent block layout: text sees [0, T); the private tail [T, L - N) is
// split between audio and video; the nuisance block [L - N, L) is visible
// to both audio and video. Raw audio-video overlap is the nuisance only.
struct LatentBlocks {
  std::size_t text_end;
  std::size_t audio_text_end;   // audio's slice of the text block
  std::size_t audio_priv_end;   // audio's slice of the private tail
  std::size_t nuisance_begin;
};

inline LatentBlocks latent_blocks(const SyntheticSpec& spec) {
  const std::size_t t = spec.text_latent_dim;
  const std::size_t nuis = spec.latent_dim - spec.nuisance_dim;
  return {t, t / 2, t + (nuis - t) / 2, nuis};
}

inline SyntheticMaps make_maps(const SyntheticSpec& spec, Rng& rng) {
  SyntheticMaps maps;
  const LatentBlocks blocks = latent_blocks(spec);
  const double s = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  auto masked = [&](std::size_t rows, auto visible) {
    Tensor m = rng.normal_tensor({rows, spec.latent_dim}, s);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < spec.latent_dim; ++j) {
        if (!visible(j)) {
          m(i, j) = 0.0;
        } else if (j >= blocks.nuisance_begin) {
          m(i, j) *= spec.nuisance_scale;
        }
      }
    return m;
  };
  maps.text_map = masked(spec.d_t, [&](std::size_t j) {
    return j < blocks.text_end;
  });
  maps.audio_map = masked(spec.d_a, [&](std::size_t j) {
    return j < blocks.audio_text_end ||
           (j >= blocks.text_end && j < blocks.audio_priv_end) ||
           j >= blocks.nuisance_begin;
  });
  maps.video_map = masked(spec.d_v, [&](std::size_t j) {
    return (j >= blocks.audio_text_end && j < blocks.text_end) ||
           (j >= blocks.audio_priv_end && j < blocks.nuisance_begin) ||
           j >= blocks.nuisance_begin;
  });
  // Labels read out the text-visible block; the private tail coordinates
  // are pure distractors.
  maps.label_w = rng.normal_tensor({spec.latent_dim});
  double norm = 0.0;
  for (std::size_t i = 0; i < spec.latent_dim; ++i) {
    if (i >= blocks.text_end) maps.label_w[i] = 0.0;
    norm += maps.label_w[i] * maps.label_w[i];
  }
  // Scale the readout so raw labels have stddev ~1.4 before clamping.
  maps.label_w *= 1.4 / std::sqrt(norm);
  maps.emotion_w = rng.normal_tensor({kEmotionCount, spec.latent_dim},
                                     1.0 / std::sqrt(
                                               static_cast<double>(
                                                   spec.latent_dim)));
  for (std::size_t e = 0; e < kEmotionCount; ++e) {
    for (std::size_t j = blocks.text_end; j < spec.latent_dim; ++j) {
      maps.emotion_w(e, j) = 0.0;
    }
  }
  maps.env_a.resize(spec.l_a);
  for (std::size_t t = 0; t < spec.l_a; ++t) {
    maps.env_a[t] = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi *
                                             static_cast<double>(t) /
                                             static_cast<double>(spec.l_a) +
                                         0.7);
  }
  maps.env_v.resize(spec.l_v);
  for (std::size_t t = 0; t < spec.l_v; ++t) {
    maps.env_v[t] = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi *
                                             static_cast<double>(t) /
                                             static_cast<double>(spec.l_v) +
                                         0.3);
  }
  return maps;
}

inline Tensor frames(const Tensor& map, const Tensor& z,
                     const std::vector<double>& env, bool nonlinear,
                     double noise, Rng& rng) {
  const std::size_t d = map.rows(), l = env.size();
  Tensor base({d});
  for (std::size_t i = 0; i < d; ++i) {
    double u = 0.0;
    for (std::size_t j = 0; j < map.cols(); ++j) u += map(i, j) * z[j];
    // cos is even in u, so the nonlinear view carries no linear trace of z.
    base[i] = nonlinear ? std::cos(1.5 * u) : u;
  }
  Tensor out({d, l});
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      out(i, t) = f32(env[t] * base[i] + noise * rng.normal());
    }
  }
  return out;
}

}  // namespace detail

/// Deterministic synthetic dataset; record ids carry their split prefix
/// ("train/...", "val/...", "test/...").
inline Dataset generate(const SyntheticSpec& spec) {
  if (spec.latent_dim == 0 || spec.text_latent_dim < 2 ||
      spec.text_latent_dim + spec.nuisance_dim > spec.latent_dim) {
    throw ConfigError(
        "generate: need 2 <= text_latent_dim and text_latent_dim + "
        "nuisance_dim <= latent_dim");
  }
  if (spec.l_a == 0 || spec.l_v == 0) {
    throw ConfigError("generate: frame counts must be >= 1");
  }
  Rng rng(derive_seed(spec.seed, "synthetic"));
  detail::SyntheticMaps maps = detail::make_maps(spec, rng);

  Dataset data;
  data.task = spec.task;
  data.d_t = spec.d_t;
  data.d_a = spec.d_a;
  data.d_v = spec.d_v;
  data.l_a = spec.l_a;
  data.l_v = spec.l_v;
  data.records.reserve(spec.n_train + spec.n_val + spec.n_test);

  const std::array<std::pair<const char*, std::size_t>, 3> parts{
      {{"train", spec.n_train}, {"val", spec.n_val}, {"test", spec.n_test}}};
  for (const auto& [prefix, count] : parts) {
    for (std::size_t n = 0; n < count; ++n) {
      UtteranceRecord rec;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s/%06zu", prefix, n);
      rec.id = buf;
      Tensor z = rng.normal_tensor({spec.latent_dim});
      rec.text = Tensor({spec.d_t});
      for (std::size_t i = 0; i < spec.d_t; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < spec.latent_dim; ++j) {
          v += maps.text_map(i, j) * z[j];
        }
        rec.text[i] = detail::f32(v + spec.noise_text * rng.normal());
      }
      rec.audio = detail::frames(maps.audio_map, z, maps.env_a, spec.nonlinear,
                                 spec.noise_audio, rng);
      rec.video = detail::frames(maps.video_map, z, maps.env_v, spec.nonlinear,
                                 spec.noise_video, rng);
      if (spec.task == Task::sentiment) {
        double raw = 0.0;
        for (std::size_t j = 0; j < spec.latent_dim; ++j) {
          raw += maps.label_w[j] * z[j];
        }
        rec.label = std::clamp(raw, -3.0, 3.0);
      } else {
        rec.emotion_labels.resize(kEmotionCount);
        for (std::size_t e = 0; e < kEmotionCount; ++e) {
          double raw = 0.0;
          for (std::size_t j = 0; j < spec.latent_dim; ++j) {
            raw += maps.emotion_w(e, j) * z[j];
          }
          rec.emotion_labels[e] = raw > 0.0 ? 1.0 : 0.0;
        }
      }
      data.records.push_back(std::move(rec));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

struct Splits {
  std::vector<std::size_t> train, val, test;
};

/// Deterministic shuffled split by fractions (cumulative rounding).
inline Splits split(const Dataset& data, std::array<double, 3> fractions,
                    std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("split: fractions must sum to 1");
  }
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto n = static_cast<double>(data.size());
  const auto b1 = static_cast<std::size_t>(std::llround(fractions[0] * n));
  const auto b2 = static_cast<std::size_t>(
      std::llround((fractions[0] + fractions[1]) * n));
  Splits s;
  s.train.assign(order.begin(), order.begin() + static_cast<long>(b1));
  s.val.assign(order.begin() + static_cast<long>(b1),
               order.begin() + static_cast<long>(b2));
  s.test.assign(order.begin() + static_cast<long>(b2), order.end());
  return s;
}

/// Split by explicit id lists; the three sets must partition the dataset.
inline Splits split(const Dataset& data,
                    const std::vector<std::string>& train_ids,
                    const std::vector<std::string>& val_ids,
                    const std::vector<std::string>& test_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    index.emplace(data.records[i].id, i);
  }
  std::unordered_set<std::size_t> used;
  auto resolve = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw DataError("split: unknown record id '" + id + "'");
      }
      if (!used.insert(it->second).second) {
        throw DataError("split: record id '" + id +
                        "' assigned to more than one split");
      }
      out.push_back(it->second);
    }
    return out;
  };
  Splits s;
  s.train = resolve(train_ids);
  s.val = resolve(val_ids);
  s.test = resolve(test_ids);
  if (used.size() != data.size()) {
    throw DataError("split: explicit ids do not cover the dataset (" +
                    std::to_string(used.size()) + " of " +
                    std::to_string(data.size()) + ")");
  }
  return s;
}

/// Split by the id prefixes written by the generator.
inline Splits split_by_prefix(const Dataset& data) {
  Splits s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& id = data.records[i].id;
    if (id.rfind("train/", 0) == 0) {
      s.train.push_back(i);
    } else if (id.rfind("val/", 0) == 0) {
      s.val.push_back(i);
    } else if (id.rfind("test/", 0) == 0) {
      s.test.push_back(i);
    } else {
      throw DataError("split_by_prefix: record id '" + id +
                      "' carries no split prefix");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// MMF container format
// ---------------------------------------------------------------------------
//
// Header line:  "MMF1 d_t d_a l_a d_v l_v count task\n"
// Per record:   id line; label line (decimal text; emotion4 uses one 0/1
//               value per emotion separated by spaces); then three binary
//               blocks (text, audio, video) of 32-bit IEEE-754 little-endian
//               values in row-major order, each preceded by its byte length
//               as an 8-byte little-endian unsigned integer. When l_a or
//               l_v is 0 in the header, the per-record frame count precedes
//               the corresponding block as an extra 8-byte integer.

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void put_f32_block(std::ostream& os, const Tensor& t) {
  put_u64_le(os, static_cast<std::uint64_t>(t.numel()) * 4);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    float f = static_cast<float>(t[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char buf[4];
    for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
    os.write(reinterpret_cast<const char*>(buf), 4);
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void save_mmf(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("save_mmf: cannot open '" + path.string() + "'");
  os << "MMF1 " << data.d_t << ' ' << data.d_a << ' ' << data.l_a << ' '
     << data.d_v << ' ' << data.l_v << ' ' << data.records.size() << ' '
     << task_name(data.task) << '\n';
  for (const auto& rec : data.records) {
    if (rec.id.find('\n') != std::string::npos) {
      throw DataError("save_mmf: record id contains a newline");
    }
    os << rec.id << '\n';
    if (data.task == Task::sentiment) {
      os << detail::format_double(rec.label) << '\n';
    } else {
      for (std::size_t e = 0; e < rec.emotion_labels.size(); ++e) {
        if (e) os << ' ';
        os << detail::format_double(rec.emotion_labels[e]);
      }
      os << '\n';
    }
    detail::put_f32_block(os, rec.text);
    if (data.l_a == 0) detail::put_u64_le(os, rec.audio.dim(1));
    detail::put_f32_block(os, rec.audio);
    if (data.l_v == 0) detail::put_u64_le(os, rec.video.dim(1));
    detail::put_f32_block(os, rec.video);
  }
  if (!os) throw DataError("save_mmf: write failed for '" + path.string() + "'");
}

namespace detail {

inline Tensor read_f32_block(std::istream& is, Shape expect,
                             const std::string& rec_id,
                             const std::filesystem::path& path) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("load_mmf: " + path.string() + ": record '" + rec_id +
                      "' at byte offset " + std::to_string(is.tellg()) + ": " +
                      why);
  };
  const std::uint64_t bytes = get_u64_le(is);
  if (!is) throw fail("truncated block length");
  const std::size_t want = shape_numel(expect);
  if (bytes != static_cast<std::uint64_t>(want) * 4) {
    throw fail("block length " + std::to_string(bytes) + " != expected " +
               std::to_string(want * 4));
  }
  Tensor t(std::move(expect));
  std::vector<unsigned char> buf(static_cast<std::size_t>(bytes));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<long>(bytes));
  if (!is) throw fail("truncated block payload");
  for (std::size_t i = 0; i < want; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(buf[4 * i + b]) << (8 * b);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f)) throw fail("non-finite value in block");
    t[i] = static_cast<double>(f);
  }
  return t;
}

}  // namespace detail

inline Dataset load_mmf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("load_mmf: cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(is, header)) {
    throw ParseError("load_mmf: " + path.string() + ": missing header");
  }
  std::istringstream hs(header);
  std::string magic, task_word;
  std::size_t d_t, d_a, l_a, d_v, l_v, count;
  if (!(hs >> magic >> d_t >> d_a >> l_a >> d_v >> l_v >> count >> task_word) ||
      magic != "MMF1") {
    throw ParseError("load_mmf: " + path.string() + ": bad header '" + header +
                     "'");
  }
  Dataset data;
  data.task = parse_task(task_word);
  data.d_t = d_t;
  data.d_a = d_a;
  data.d_v = d_v;
  data.l_a = l_a;
  data.l_v = l_v;
  data.records.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    UtteranceRecord rec;
    if (!std::getline(is, rec.id)) {
      throw ParseError("load_mmf: " + path.string() + ": truncated at record " +
                       std::to_string(n) + " (byte offset " +
                       std::to_string(is.tellg()) + ")");
    }
    std::string label_line;
    if (!std::getline(is, label_line)) {
      throw ParseError("load_mmf: " + path.string() + ": record '" + rec.id +
                       "': missing label line");
    }
    std::istringstream ls(label_line);
    if (data.task == Task::sentiment) {
      if (!(ls >> rec.label) || !std::isfinite(rec.label)) {
        throw ParseError("load_mmf: " + path.string() + ": record '" + rec.id +
                         "': bad label '" + label_line + "'");
      }
    } else {
      double v;
      while (ls >> v) rec.emotion_labels.push_back(v);
      if (rec.emotion_labels.size() != kEmotionCount) {
        throw ParseError("load_mmf: " + path.string() + ": record '" + rec.id +
                         "': expected " + std::to_string(kEmotionCount) +
                         " emotion labels");
      }
    }
    rec.text = detail::read_f32_block(is, {d_t}, rec.id, path);
    std::size_t la = l_a, lv = l_v;
    if (l_a == 0) la = detail::get_u64_le(is);
    rec.audio = detail::read_f32_block(is, {d_a, la}, rec.id, path);
    if (l_v == 0) lv = detail::get_u64_le(is);
    rec.video = detail::read_f32_block(is, {d_v, lv}, rec.id, path);
    if (la == 0 || lv == 0) {
      throw ParseError("load_mmf: " + path.string() + ": record '" + rec.id +
                       "': zero-length frame sequence");
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace iccn
