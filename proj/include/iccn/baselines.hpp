#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iccn/cca.hpp"
#include "iccn/data.hpp"
#include "iccn/dcca.hpp"
#include "iccn/errors.hpp"

namespace iccn {

// §-style baseline embeddings: uni-modal pooling, concatenations, and the
// CCA-family fusions. Temporal audio/video inputs are mean-pooled over
// frames before entering any solver.
enum class BaselineKind {
  text,
  audio,
  video,
  concat_ta,
  concat_tv,
  concat_avt,
  cca,        // CCA on (audio, video), projections + raw text
  kcca,       // kernel CCA on (audio, video), projections + raw text
  gcca,       // GCCA over all three views, shared projection only
  gcca_text,  // GCCA projection + raw text
  dcca_concat // deep CCA of [audio; video] against text, + raw features
};

inline const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::text: return "text";
    case BaselineKind::audio: return "audio";
    case BaselineKind::video: return "video";
    case BaselineKind::concat_ta: return "concat-ta";
    case BaselineKind::concat_tv: return "concat-tv";
    case BaselineKind::concat_avt: return "concat-avt";
    case BaselineKind::cca: return "cca";
    case BaselineKind::kcca: return "kcca";
    case BaselineKind::gcca: return "gcca";
    case BaselineKind::gcca_text: return "gcca+text";
    default: return "dcca-concat";
  }
}

inline const std::vector<std::string>& baseline_kind_names() {
  static const std::vector<std::string> names{
      "text",  "audio", "video", "concat-ta",  "concat-tv",  "concat-avt",
      "cca",   "kcca",  "gcca",  "gcca+text",  "dcca-concat"};
  return names;
}

inline BaselineKind parse_baseline_kind(const std::string& s) {
  for (std::size_t i = 0; i < baseline_kind_names().size(); ++i) {
    if (baseline_kind_names()[i] == s) return static_cast<BaselineKind>(i);
  }
  std::string valid;
  for (const auto& n : baseline_kind_names()) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw ConfigError("unknown baseline kind '" + s + "' (valid: " + valid + ")");
}

struct BaselineConfig {
  std::size_t r = 30;      // solver output dimension
  double reg = 1e-4;       // ridge / regularization for all solvers
  KernelSpec kernel_audio{KernelSpec::Kind::rbf, 0.0};  // 0 = median heuristic
  KernelSpec kernel_video{KernelSpec::Kind::rbf, 0.0};
  DccaConfig dcca;
  std::uint64_t seed = 0;
};

/// Fits the requested baseline on a training subset, then embeds arbitrary
/// records of the same dataset family.
class BaselineModel {
 public:
  BaselineModel(BaselineKind kind, BaselineConfig cfg)
      : kind_(kind), cfg_(std::move(cfg)) {}

  BaselineKind kind() const { return kind_; }

  void fit(const Dataset& data, const std::vector<std::size_t>& train_idx) {
    if (train_idx.empty()) {
      throw DegenerateInputError("baseline fit: empty training split");
    }
    switch (kind_) {
      case BaselineKind::text:
      case BaselineKind::audio:
      case BaselineKind::video:
      case BaselineKind::concat_ta:
      case BaselineKind::concat_tv:
      case BaselineKind::concat_avt:
        break;  // nothing to fit
      case BaselineKind::cca: {
        Tensor a = modality_matrix(data, train_idx, Modality::audio);
        Tensor v = modality_matrix(data, train_idx, Modality::video);
        const std::size_t r = std::min({cfg_.r, a.rows(), v.rows()});
        cca_ = linear_cca(a, v, r, cfg_.reg);
        break;
      }
      case BaselineKind::kcca: {
        Tensor a = modality_matrix(data, train_idx, Modality::audio);
        Tensor v = modality_matrix(data, train_idx, Modality::video);
        KccaSolution sol = kernel_cca(a, v, cfg_.kernel_audio,
                                      cfg_.kernel_video,
                                      std::min(cfg_.r, train_idx.size() / 2),
                                      cfg_.reg);
        kcca_ = std::move(sol);
        break;
      }
      case BaselineKind::gcca:
      case BaselineKind::gcca_text: {
        std::vector<Tensor> views{
            modality_matrix(data, train_idx, Modality::audio),
            modality_matrix(data, train_idx, Modality::video),
            modality_matrix(data, train_idx, Modality::text)};
        const std::size_t r = std::min(cfg_.r, train_idx.size() - 1);
        gcca_ = gcca(views, r, cfg_.reg);
        break;
      }
      case BaselineKind::dcca_concat: {
        Tensor a = modality_matrix(data, train_idx, Modality::audio);
        Tensor v = modality_matrix(data, train_idx, Modality::video);
        Tensor t = modality_matrix(data, train_idx, Modality::text);
        Tensor av = stack_av(a, v);  // m x (d_a + d_v)
        DccaConfig dc = cfg_.dcca;
        dc.seed = cfg_.seed;
        dcca_.emplace(av.cols(), t.rows(), dc);
        dcca_->fit(av, transpose(t));
        break;
      }
    }
  }

  Tensor embed(const UtteranceRecord& rec) {
    const Tensor a = mean_pool(rec.audio);
    const Tensor v = mean_pool(rec.video);
    switch (kind_) {
      case BaselineKind::text: return rec.text;
      case BaselineKind::audio: return a;
      case BaselineKind::video: return v;
      case BaselineKind::concat_ta: return concat({rec.text, a});
      case BaselineKind::concat_tv: return concat({rec.text, v});
      case BaselineKind::concat_avt: return concat({a, v, rec.text});
      case BaselineKind::cca: {
        auto [pa, pv] = cca_project(*cca_, as_column(a), as_column(v));
        return concat({rec.text, first_column(pa), first_column(pv)});
      }
      case BaselineKind::kcca: {
        Tensor pa = kcca_project_x(*kcca_, as_column(a));
        Tensor pv = kcca_project_y(*kcca_, as_column(v));
        return concat({rec.text, first_column(pa), first_column(pv)});
      }
      case BaselineKind::gcca:
      case BaselineKind::gcca_text: {
        // Out-of-sample shared representation: mean of the per-view maps.
        Tensor pa = gcca_project(*gcca_, 0, as_column(a));
        Tensor pv = gcca_project(*gcca_, 1, as_column(v));
        Tensor pt = gcca_project(*gcca_, 2, as_column(rec.text));
        Tensor shared({pa.rows()});
        for (std::size_t i = 0; i < shared.numel(); ++i) {
          shared[i] = (pa(i, 0) + pv(i, 0) + pt(i, 0)) / 3.0;
        }
        if (kind_ == BaselineKind::gcca) return shared;
        return concat({rec.text, shared});
      }
      case BaselineKind::dcca_concat: {
        Tensor av({1, a.numel() + v.numel()});
        for (std::size_t i = 0; i < a.numel(); ++i) av(0, i) = a[i];
        for (std::size_t i = 0; i < v.numel(); ++i) av(0, a.numel() + i) = v[i];
        Tensor t({1, rec.text.numel()});
        for (std::size_t i = 0; i < rec.text.numel(); ++i) t(0, i) = rec.text[i];
        Tensor fx = dcca_->transform_x(av);
        Tensor fy = dcca_->transform_y(t);
        return concat({row_vector(fx), row_vector(fy), rec.text, a, v});
      }
    }
    throw ConfigError("baseline embed: unhandled kind");
  }

  /// Embedding matrix (n x d) over a record subset, row order as given.
  Tensor embed_all(const Dataset& data,
                   const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw DegenerateInputError("baseline embed: no records");
    Tensor first = embed(data.records[idx[0]]);
    Tensor out({idx.size(), first.numel()});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Tensor e = r == 0 ? first : embed(data.records[idx[r]]);
      for (std::size_t j = 0; j < e.numel(); ++j) out(r, j) = e[j];
    }
    return out;
  }

 private:
  static Tensor concat(const std::vector<Tensor>& parts) {
    std::size_t total = 0;
    for (const auto& p : parts) total += p.numel();
    Tensor out({total});
    std::size_t off = 0;
    for (const auto& p : parts) {
      for (std::size_t i = 0; i < p.numel(); ++i) out[off++] = p[i];
    }
    return out;
  }

  static Tensor as_column(const Tensor& v) {
    Tensor out({v.numel(), 1});
    for (std::size_t i = 0; i < v.numel(); ++i) out(i, 0) = v[i];
    return out;
  }

  static Tensor first_column(const Tensor& m) {
    Tensor out({m.rows()});
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, 0);
    return out;
  }

  static Tensor row_vector(const Tensor& m) {
    Tensor out({m.cols()});
    for (std::size_t i = 0; i < m.cols(); ++i) out[i] = m(0, i);
    return out;
  }

  /// (d_a x m) and (d_v x m) samples-in-columns to one (m x d_a+d_v) batch.
  static Tensor stack_av(const Tensor& a, const Tensor& v) {
    Tensor out({a.cols(), a.rows() + v.rows()});
    for (std::size_t s = 0; s < a.cols(); ++s) {
      for (std::size_t i = 0; i < a.rows(); ++i) out(s, i) = a(i, s);
      for (std::size_t i = 0; i < v.rows(); ++i) out(s, a.rows() + i) = v(i, s);
    }
    return out;
  }

  BaselineKind kind_;
  BaselineConfig cfg_;
  std::optional<CcaSolution> cca_;
  std::optional<KccaSolution> kcca_;
  std::optional<GccaSolution> gcca_;
  std::optional<DeepCca> dcca_;
};

}  // namespace iccn
