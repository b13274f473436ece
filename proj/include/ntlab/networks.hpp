#pragma once

// Feature extractor F, classifier C and joint discriminator D.
//
// Each forward pass has two overloads: a mutable model binds its parameters
// as trainable graph leaves, a const model binds them as constants (used for
// evaluation and for the gate, where nothing may flow back into D or F).

#include <cstdint>
#include <optional>
#include <vector>

#include "ntlab/autodiff.hpp"

namespace ntlab {

struct ModelDims {
  std::size_t input_dim = 2;
  std::size_t hidden = 64;
  std::size_t feature_dim = 16;
  std::size_t disc_hidden = 64;
  std::size_t num_classes = 3;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct Linear {
  ad::Parameter weight;  // (in x out)
  ad::Parameter bias;    // (1 x out)

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }
};

/// input_dim -> hidden -> hidden -> feature_dim, tanh after every layer.
struct FeatureExtractor {
  Linear l1, l2, l3;
  std::size_t input_dim() const { return l1.in_dim(); }
  std::size_t feature_dim() const { return l3.out_dim(); }
};

/// feature_dim -> K logits.
struct Classifier {
  Linear out;
  std::size_t num_classes() const { return out.out_dim(); }
};

/// [features | label input] (feature_dim + K + 1) -> disc_hidden (tanh) -> 1 logit.
struct JointDiscriminator {
  Linear hidden, out;
  std::size_t num_classes = 0;
};

struct ModelTriple {
  ModelDims dims;
  FeatureExtractor F;
  Classifier C;
  JointDiscriminator D;

  /// Scaled-uniform initialization, a = sqrt(6 / (fan_in + fan_out)), zero biases.
  static ModelTriple init(const ModelDims& dims, std::uint64_t seed);
  /// Every weight and bias set to zero.
  static ModelTriple zeros(const ModelDims& dims);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  void zero_grad();
};

/// Label slot vector of length K + 1: one-hot class in slots 0..K-1, nil in slot K.
using LabelInput = std::vector<double>;

/// y == std::nullopt encodes the nil dummy label. Throws DomainError when y >= K or y < 0.
LabelInput encode_label(std::optional<int> y, std::size_t num_classes);
/// Batch of class label inputs (n x (K + 1)).
Tensor encode_labels(const std::vector<int>& ys, std::size_t num_classes);
Tensor encode_nil_labels(std::size_t n, std::size_t num_classes);

ad::Var feature_forward(ad::Graph& g, FeatureExtractor& F, ad::Var x);
ad::Var feature_forward(ad::Graph& g, const FeatureExtractor& F, ad::Var x);
Tensor feature_forward(const FeatureExtractor& F, const Tensor& x);

ad::Var classifier_logits(ad::Graph& g, Classifier& C, ad::Var f);
ad::Var classifier_logits(ad::Graph& g, const Classifier& C, ad::Var f);
/// Row-wise softmax class probabilities.
Tensor classify(const Classifier& C, const Tensor& features);

ad::Var discriminator_logit(ad::Graph& g, JointDiscriminator& D, ad::Var f, ad::Var labels);
ad::Var discriminator_logit(ad::Graph& g, const JointDiscriminator& D, ad::Var f, ad::Var labels);
/// Probability that (f, label) came from the target domain, strictly inside (0, 1).
Tensor discriminate(const JointDiscriminator& D, const Tensor& features, const Tensor& labels);

/// Class predictions (argmax, first index wins ties) for a batch of inputs.
std::vector<int> predict(const ModelTriple& m, const Tensor& x);
Tensor predict_proba(const ModelTriple& m, const Tensor& x);

}  // namespace ntlab
