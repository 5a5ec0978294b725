// toy_vlm.hpp
//
// A minimal trainable image captioner plus the synthetic dataset it learns.
//
// Data: each scene is one of 4 shapes at one of 5 positions with one of 3
// intensities, stamped on an H x W grayscale grid with small per-pixel
// noise so every image is unique. Its reference caption follows a fixed
// grammar with two per-sample random phrasing choices (article a/the,
// position synonym top-left/upper-left, center/middle). A model that
// overfits its training set reproduces member phrasing exactly, while
// non-members' own phrasing matches only by chance - that asymmetry is the
// membership signal the attack statistics measure.
//
// Model: linear encoder onto a tanh 2-D hidden sheet, then one linear
// softmax classifier per caption position (fixed length, no autoregression,
// greedy argmax decoding). Training is plain mini-batch gradient descent on
//   j_tau = caption cross-entropy + tau * r_topo(batch sheets)
// with hand-derived analytic gradients throughout; the topographic penalty
// is applied to the encoder's hidden sheet.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmia/errors.hpp"
#include "vlmia/rng.hpp"
#include "vlmia/text_metrics.hpp"
#include "vlmia/topo.hpp"
#include "vlmia/util.hpp"

namespace vlmia {

// --- vocabulary and caption grammar --------------------------------------

inline constexpr int kCaptionLength = 5;
inline constexpr int kPadToken = 0;

inline const std::vector<std::string>& toy_vocabulary() {
  static const std::vector<std::string> vocab = {
      "<pad>", "a",     "the",     "dark",  "gray",  "bright",
      "square", "circle", "triangle", "cross", "top",  "upper",
      "bottom", "lower", "left",    "right", "center", "middle"};
  return vocab;
}

enum class Shape { square, circle, triangle, cross };
enum class Position { top_left, top_right, bottom_left, bottom_right, center };
enum class Intensity { dark, gray, bright };

struct SceneParams {
  Shape shape;
  Position position;
  Intensity intensity;
};

struct CaptionTemplate {
  std::array<int, kCaptionLength> token_ids{};
};

// token ids: 1 a, 2 the, 3..5 intensity, 6..9 shape, 10..17 position words
inline CaptionTemplate make_caption(const SceneParams& p, bool alt_article, bool alt_position) {
  CaptionTemplate t;
  t.token_ids[0] = alt_article ? 2 : 1;
  t.token_ids[1] = 3 + static_cast<int>(p.intensity);
  t.token_ids[2] = 6 + static_cast<int>(p.shape);
  switch (p.position) {
    case Position::top_left:
      t.token_ids[3] = alt_position ? 11 : 10;
      t.token_ids[4] = 14;
      break;
    case Position::top_right:
      t.token_ids[3] = alt_position ? 11 : 10;
      t.token_ids[4] = 15;
      break;
    case Position::bottom_left:
      t.token_ids[3] = alt_position ? 13 : 12;
      t.token_ids[4] = 14;
      break;
    case Position::bottom_right:
      t.token_ids[3] = alt_position ? 13 : 12;
      t.token_ids[4] = 15;
      break;
    case Position::center:
      t.token_ids[3] = alt_position ? 17 : 16;
      t.token_ids[4] = kPadToken;
      break;
  }
  return t;
}

// Joins tokens with single spaces, trailing padding stripped.
inline std::string caption_to_string(const CaptionTemplate& t) {
  int last = kCaptionLength - 1;
  while (last >= 0 && t.token_ids[last] == kPadToken) --last;
  std::string out;
  for (int i = 0; i <= last; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += toy_vocabulary()[static_cast<std::size_t>(t.token_ids[i])];
  }
  return out;
}

inline CaptionTemplate caption_from_string(const std::string& text) {
  const TokenSequence tokens = tokenize(text);
  if (tokens.size() > kCaptionLength) {
    throw DataError("caption longer than template length: \"" + text + "\"");
  }
  CaptionTemplate t;
  t.token_ids.fill(kPadToken);
  const auto& vocab = toy_vocabulary();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = std::find(vocab.begin(), vocab.end(), tokens[i]);
    if (it == vocab.end()) throw DataError("token not in vocabulary: '" + tokens[i] + "'");
    t.token_ids[i] = static_cast<int>(it - vocab.begin());
  }
  return t;
}

// --- scene rendering ------------------------------------------------------

struct SyntheticScene {
  int height = 0;
  int width = 0;
  std::vector<double> image;  // row-major, values in [0,1]
  SceneParams params{};
};

inline SyntheticScene render_scene(const SceneParams& p, int height, int width,
                                   double noise_amplitude, std::uint64_t noise_seed) {
  SyntheticScene scene;
  scene.height = height;
  scene.width = width;
  scene.params = p;
  scene.image.assign(static_cast<std::size_t>(height) * width, 0.0);

  int cr = 0, cc = 0;
  switch (p.position) {
    case Position::top_left:     cr = height / 4;     cc = width / 4;     break;
    case Position::top_right:    cr = height / 4;     cc = 3 * width / 4; break;
    case Position::bottom_left:  cr = 3 * height / 4; cc = width / 4;     break;
    case Position::bottom_right: cr = 3 * height / 4; cc = 3 * width / 4; break;
    case Position::center:       cr = height / 2;     cc = width / 2;     break;
  }
  const int rad = std::max(1, std::min(height, width) / 6);
  double value = 0.0;
  switch (p.intensity) {
    case Intensity::dark:   value = 0.35; break;
    case Intensity::gray:   value = 0.65; break;
    case Intensity::bright: value = 0.95; break;
  }
  for (int dr = -rad; dr <= rad; ++dr) {
    for (int dc = -rad; dc <= rad; ++dc) {
      bool inside = false;
      switch (p.shape) {
        case Shape::square:   inside = true; break;
        case Shape::circle:   inside = dr * dr + dc * dc <= rad * rad + rad / 2; break;
        case Shape::triangle: inside = 2 * std::abs(dc) <= dr + rad; break;
        case Shape::cross:    inside = dr == 0 || dc == 0; break;
      }
      const int r = cr + dr, c = cc + dc;
      if (inside && r >= 0 && r < height && c >= 0 && c < width) {
        scene.image[static_cast<std::size_t>(r) * width + c] = value;
      }
    }
  }
  Rng noise(noise_seed);
  for (double& px : scene.image) {
    px = std::clamp(px + noise_amplitude * noise.symmetric(), 0.0, 1.0);
  }
  return scene;
}

// --- dataset generation ---------------------------------------------------

struct DataPair {
  std::string id;
  SyntheticScene scene;
  CaptionTemplate caption;
};

struct ToyDataset {
  std::vector<DataPair> members;
  std::vector<DataPair> non_members;
};

inline constexpr int kSceneCombos = 4 * 5 * 3;
// per-combo noise variants before generation refuses; 60 * 65536 samples
inline constexpr std::uint64_t kMaxVariantsPerCombo = 65536;

// Scene parameter combos are filled round-robin (all 60 distinct combos
// before any repeats), so every sample's (combo, variant) tuple is unique
// and member / non-member sets are disjoint by construction.
inline ToyDataset generate_dataset(std::size_t n_members, std::size_t n_nonmembers,
                                   std::uint64_t seed, int height = 12, int width = 12,
                                   double noise_amplitude = 0.05) {
  if (n_members == 0 || n_nonmembers == 0) {
    throw ConfigError("generate_dataset: need at least one member and one non-member");
  }
  const std::uint64_t total = n_members + n_nonmembers;
  if (total > kSceneCombos * kMaxVariantsPerCombo) {
    throw DataError("generate_dataset: requested " + std::to_string(total) +
                    " samples exceeds the distinct (scene, noise) capacity of " +
                    std::to_string(kSceneCombos * kMaxVariantsPerCombo));
  }

  std::vector<SceneParams> combos;
  combos.reserve(kSceneCombos);
  for (int s = 0; s < 4; ++s) {
    for (int p = 0; p < 5; ++p) {
      for (int i = 0; i < 3; ++i) {
        combos.push_back({static_cast<Shape>(s), static_cast<Position>(p),
                          static_cast<Intensity>(i)});
      }
    }
  }
  Rng order(derive_seed(seed, "combo-order"));
  order.shuffle(combos);

  ToyDataset ds;
  for (std::uint64_t k = 0; k < total; ++k) {
    const bool is_member = k < n_members;
    const SceneParams& params = combos[k % kSceneCombos];
    char id[16];
    std::snprintf(id, sizeof(id), "%c%05llu", is_member ? 'm' : 'n',
                  static_cast<unsigned long long>(is_member ? k : k - n_members));
    Rng phrase(derive_seed(seed, "phrase", k));
    const bool alt_article = phrase.next() & 1;
    const bool alt_position = phrase.next() & 1;
    DataPair pair{id,
                  render_scene(params, height, width, noise_amplitude,
                               derive_seed(seed, "scene-noise", k)),
                  make_caption(params, alt_article, alt_position)};
    (is_member ? ds.members : ds.non_members).push_back(std::move(pair));
  }
  return ds;
}

// Deterministic shuffle then split; train gets ceil(fraction * n).
inline std::pair<std::vector<DataPair>, std::vector<DataPair>> split_members(
    const std::vector<DataPair>& members, double fraction, std::uint64_t seed) {
  if (members.empty()) throw DataError("split_members: empty member list");
  std::vector<std::size_t> idx(members.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "member-split"));
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(members.size())));
  std::pair<std::vector<DataPair>, std::vector<DataPair>> out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(members[idx[i]]);
  }
  return out;
}

// --- model ----------------------------------------------------------------

struct ToyModelParams {
  int sheet_height = 0;
  int sheet_width = 0;
  int image_height = 0;
  int image_width = 0;
  int caption_length = kCaptionLength;
  int vocab_size = 0;
  std::vector<double> encoder_weights;  // (sheet units) x (image pixels)
  std::vector<double> encoder_bias;     // sheet units
  std::vector<double> decoder_weights;  // caption_length x vocab x sheet units
  std::vector<double> decoder_bias;     // caption_length x vocab

  int sheet_units() const { return sheet_height * sheet_width; }
  int image_pixels() const { return image_height * image_width; }

  // uniform +-1/sqrt(fan_in) per matrix
  static ToyModelParams init(int sheet_h, int sheet_w, int img_h, int img_w,
                             std::uint64_t seed, int caption_len = kCaptionLength,
                             int vocab = static_cast<int>(toy_vocabulary().size())) {
    ToyModelParams p;
    p.sheet_height = sheet_h;
    p.sheet_width = sheet_w;
    p.image_height = img_h;
    p.image_width = img_w;
    p.caption_length = caption_len;
    p.vocab_size = vocab;
    const int units = p.sheet_units(), pixels = p.image_pixels();
    p.encoder_weights.resize(static_cast<std::size_t>(units) * pixels);
    p.encoder_bias.resize(units);
    p.decoder_weights.resize(static_cast<std::size_t>(caption_len) * vocab * units);
    p.decoder_bias.resize(static_cast<std::size_t>(caption_len) * vocab);
    Rng rng(derive_seed(seed, "param-init"));
    const double enc_scale = 1.0 / std::sqrt(static_cast<double>(pixels));
    for (double& w : p.encoder_weights) w = enc_scale * rng.symmetric();
    for (double& b : p.encoder_bias) b = enc_scale * rng.symmetric();
    const double dec_scale = 1.0 / std::sqrt(static_cast<double>(units));
    for (double& w : p.decoder_weights) w = dec_scale * rng.symmetric();
    for (double& b : p.decoder_bias) b = dec_scale * rng.symmetric();
    return p;
  }
};

struct ForwardResult {
  CorticalMap sheet;
  std::vector<double> logits;  // caption_length x vocab, row-major
  std::vector<double> probs;   // same shape, each row sums to 1
};

inline ForwardResult forward(const ToyModelParams& p, const std::vector<double>& image) {
  if (image.size() != static_cast<std::size_t>(p.image_pixels())) {
    throw DataError("forward: image has " + std::to_string(image.size()) +
                    " pixels, model expects " + std::to_string(p.image_pixels()));
  }
  ForwardResult out;
  const int units = p.sheet_units();
  out.sheet = CorticalMap(p.sheet_height, p.sheet_width);
  for (int u = 0; u < units; ++u) {
    double z = p.encoder_bias[u];
    const double* row = &p.encoder_weights[static_cast<std::size_t>(u) * p.image_pixels()];
    for (int i = 0; i < p.image_pixels(); ++i) z += row[i] * image[i];
    out.sheet.activations[u] = std::tanh(z);
  }
  out.logits.resize(static_cast<std::size_t>(p.caption_length) * p.vocab_size);
  out.probs.resize(out.logits.size());
  for (int pos = 0; pos < p.caption_length; ++pos) {
    double* logits = &out.logits[static_cast<std::size_t>(pos) * p.vocab_size];
    for (int v = 0; v < p.vocab_size; ++v) {
      const double* row =
          &p.decoder_weights[(static_cast<std::size_t>(pos) * p.vocab_size + v) * units];
      double z = p.decoder_bias[static_cast<std::size_t>(pos) * p.vocab_size + v];
      for (int u = 0; u < units; ++u) z += row[u] * out.sheet.activations[u];
      logits[v] = z;
    }
    double max_logit = logits[0];
    for (int v = 1; v < p.vocab_size; ++v) max_logit = std::max(max_logit, logits[v]);
    double sum = 0.0;
    double* probs = &out.probs[static_cast<std::size_t>(pos) * p.vocab_size];
    for (int v = 0; v < p.vocab_size; ++v) {
      probs[v] = std::exp(logits[v] - max_logit);
      sum += probs[v];
    }
    for (int v = 0; v < p.vocab_size; ++v) probs[v] /= sum;
  }
  return out;
}

// Mean over positions of -log p(target token), with a 1e-12 floor.
inline double caption_loss(const std::vector<double>& probs, const CaptionTemplate& target,
                           int vocab_size) {
  const int caption_len = static_cast<int>(probs.size()) / vocab_size;
  double loss = 0.0;
  for (int pos = 0; pos < caption_len; ++pos) {
    const double p = probs[static_cast<std::size_t>(pos) * vocab_size + target.token_ids[pos]];
    loss -= std::log(std::max(p, 1e-12));
  }
  return loss / static_cast<double>(caption_len);
}

// --- training -------------------------------------------------------------

struct TrainConfig {
  int epochs = 900;
  double learning_rate = 0.4;
  int batch_size = 16;
  std::uint64_t seed = 42;
  TopoConfig topo;
};

struct ParamGrads {
  std::vector<double> encoder_weights, encoder_bias, decoder_weights, decoder_bias;

  explicit ParamGrads(const ToyModelParams& p)
      : encoder_weights(p.encoder_weights.size(), 0.0),
        encoder_bias(p.encoder_bias.size(), 0.0),
        decoder_weights(p.decoder_weights.size(), 0.0),
        decoder_bias(p.decoder_bias.size(), 0.0) {}
};

struct BatchLoss {
  double j_cap = 0.0;  // mean caption cross-entropy over the batch
  double r_topo = 0.0; // topographic penalty of the batch sheets
  double j_tau = 0.0;  // j_cap + tau * r_topo
};

namespace detail {

struct BatchView {
  const std::vector<double>* image;
  const CaptionTemplate* target;
};

// One forward/backward pass over a batch. Gradients flow from the softmax
// cross-entropy into the decoder and sheet, from r_topo into the sheet, and
// through tanh into the encoder.
inline BatchLoss batch_loss_and_grad(const ToyModelParams& p,
                                     const std::vector<BatchView>& batch,
                                     const BlurKernel& kernel, double tau, double epsilon,
                                     ParamGrads* grads) {
  const int units = p.sheet_units();
  const int pixels = p.image_pixels();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double inv_len = 1.0 / static_cast<double>(p.caption_length);

  std::vector<ForwardResult> passes;
  std::vector<CorticalMap> sheets;
  passes.reserve(batch.size());
  sheets.reserve(batch.size());
  BatchLoss loss;
  for (const auto& sample : batch) {
    passes.push_back(forward(p, *sample.image));
    sheets.push_back(passes.back().sheet);
    loss.j_cap += caption_loss(passes.back().probs, *sample.target, p.vocab_size);
  }
  loss.j_cap *= inv_batch;
  loss.r_topo = r_topo(sheets, kernel, epsilon);
  loss.j_tau = total_loss(loss.j_cap, loss.r_topo, tau);
  if (grads == nullptr) return loss;

  const std::vector<CorticalMap> topo_grads =
      tau != 0.0 ? r_topo_grad(sheets, kernel, epsilon) : std::vector<CorticalMap>();

  std::vector<double> dsheet(units);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const ForwardResult& fwd = passes[k];
    const CaptionTemplate& target = *batch[k].target;
    std::fill(dsheet.begin(), dsheet.end(), 0.0);
    for (int pos = 0; pos < p.caption_length; ++pos) {
      const double* probs = &fwd.probs[static_cast<std::size_t>(pos) * p.vocab_size];
      for (int v = 0; v < p.vocab_size; ++v) {
        // d j_cap / d logit, scaled by the batch mean
        double dlogit = probs[v];
        if (v == target.token_ids[pos]) dlogit -= 1.0;
        dlogit *= inv_len * inv_batch;
        const std::size_t row =
            (static_cast<std::size_t>(pos) * p.vocab_size + v) * units;
        for (int u = 0; u < units; ++u) {
          grads->decoder_weights[row + u] += dlogit * fwd.sheet.activations[u];
          dsheet[u] += dlogit * p.decoder_weights[row + u];
        }
        grads->decoder_bias[static_cast<std::size_t>(pos) * p.vocab_size + v] += dlogit;
      }
    }
    if (tau != 0.0) {
      for (int u = 0; u < units; ++u) {
        dsheet[u] += tau * topo_grads[k].activations[u];
      }
    }
    const std::vector<double>& image = *batch[k].image;
    for (int u = 0; u < units; ++u) {
      const double s = fwd.sheet.activations[u];
      const double dz = dsheet[u] * (1.0 - s * s);  // tanh'
      double* wrow = &grads->encoder_weights[static_cast<std::size_t>(u) * pixels];
      for (int i = 0; i < pixels; ++i) wrow[i] += dz * image[i];
      grads->encoder_bias[u] += dz;
    }
  }
  return loss;
}

}  // namespace detail

// Scalar objective over a batch; the finite-difference tests diff this.
inline double compute_j_tau(const ToyModelParams& p, const std::vector<std::vector<double>>& images,
                            const std::vector<CaptionTemplate>& targets,
                            const BlurKernel& kernel, double tau, double epsilon = 1e-12) {
  std::vector<detail::BatchView> batch;
  for (std::size_t i = 0; i < images.size(); ++i) batch.push_back({&images[i], &targets[i]});
  return detail::batch_loss_and_grad(p, batch, kernel, tau, epsilon, nullptr).j_tau;
}

inline BatchLoss compute_j_tau_grad(const ToyModelParams& p,
                                    const std::vector<std::vector<double>>& images,
                                    const std::vector<CaptionTemplate>& targets,
                                    const BlurKernel& kernel, double tau, ParamGrads& grads,
                                    double epsilon = 1e-12) {
  std::vector<detail::BatchView> batch;
  for (std::size_t i = 0; i < images.size(); ++i) batch.push_back({&images[i], &targets[i]});
  return detail::batch_loss_and_grad(p, batch, kernel, tau, epsilon, &grads);
}

struct TraceEntry {
  int epoch;
  double j_cap;   // epoch mean of batch j_cap
  double r_topo;  // epoch mean of batch r_topo
  double j_tau;   // j_cap + tau * r_topo
};

// Mini-batch gradient descent; batch order is reshuffled per epoch from the
// run seed, so identical configs give bit-identical parameters.
inline std::vector<TraceEntry> train(ToyModelParams& params, const std::vector<DataPair>& pairs,
                                     const TrainConfig& config) {
  if (pairs.empty()) throw DataError("train: empty training set");
  if (config.epochs <= 0 || config.batch_size <= 0 || config.learning_rate < 0.0) {
    throw ConfigError("train: epochs and batch_size must be positive, learning_rate >= 0");
  }
  const BlurKernel kernel = config.topo.sigma > 0.0 ? BlurKernel::gaussian(config.topo.sigma)
                                                    : BlurKernel::identity();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<TraceEntry> trace;
  trace.reserve(config.epochs);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double sum_cap = 0.0, sum_topo = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<detail::BatchView> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back({&pairs[order[i]].scene.image, &pairs[order[i]].caption});
      }
      ParamGrads grads(params);
      const BatchLoss loss = detail::batch_loss_and_grad(params, batch, kernel, config.topo.tau,
                                                         config.topo.epsilon, &grads);
      if (!std::isfinite(loss.j_tau)) {
        throw DivergenceError("train: non-finite objective at epoch " + std::to_string(epoch));
      }
      sum_cap += loss.j_cap;
      sum_topo += loss.r_topo;
      ++n_batches;
      const double lr = config.learning_rate;
      for (std::size_t i = 0; i < params.encoder_weights.size(); ++i) {
        params.encoder_weights[i] -= lr * grads.encoder_weights[i];
      }
      for (std::size_t i = 0; i < params.encoder_bias.size(); ++i) {
        params.encoder_bias[i] -= lr * grads.encoder_bias[i];
      }
      for (std::size_t i = 0; i < params.decoder_weights.size(); ++i) {
        params.decoder_weights[i] -= lr * grads.decoder_weights[i];
      }
      for (std::size_t i = 0; i < params.decoder_bias.size(); ++i) {
        params.decoder_bias[i] -= lr * grads.decoder_bias[i];
      }
    }
    const double mean_cap = sum_cap / static_cast<double>(n_batches);
    const double mean_topo = sum_topo / static_cast<double>(n_batches);
    trace.push_back({epoch, mean_cap, mean_topo, total_loss(mean_cap, mean_topo, config.topo.tau)});
  }
  return trace;
}

// --- greedy decoding --------------------------------------------------------

// Per-position argmax, ties broken by lowest token index.
inline CaptionTemplate caption_ids(const ToyModelParams& p, const std::vector<double>& image) {
  const ForwardResult fwd = forward(p, image);
  CaptionTemplate out;
  out.token_ids.fill(kPadToken);
  for (int pos = 0; pos < p.caption_length && pos < kCaptionLength; ++pos) {
    const double* logits = &fwd.logits[static_cast<std::size_t>(pos) * p.vocab_size];
    int best = 0;
    for (int v = 1; v < p.vocab_size; ++v) {
      if (logits[v] > logits[best]) best = v;
    }
    out.token_ids[pos] = best;
  }
  return out;
}

inline std::string caption(const ToyModelParams& p, const std::vector<double>& image) {
  return caption_to_string(caption_ids(p, image));
}

// --- persistence ------------------------------------------------------------

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"tau", c.topo.tau},
          {"sigma", c.topo.sigma},
          {"epsilon", c.topo.epsilon}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.topo.tau = j.at("tau").get<double>();
  c.topo.sigma = j.at("sigma").get<double>();
  c.topo.epsilon = j.at("epsilon").get<double>();
  return c;
}

inline void save_checkpoint(const ToyModelParams& p, const TrainConfig& config,
                            const std::filesystem::path& path) {
  nlohmann::json j = {
      {"v", 1},
      {"sheet_height", p.sheet_height},
      {"sheet_width", p.sheet_width},
      {"image_height", p.image_height},
      {"image_width", p.image_width},
      {"caption_length", p.caption_length},
      {"vocab_size", p.vocab_size},
      {"encoder_weights", p.encoder_weights},
      {"encoder_bias", p.encoder_bias},
      {"decoder_weights", p.decoder_weights},
      {"decoder_bias", p.decoder_bias},
      {"train_config", train_config_to_json(config)},
  };
  write_file(path, j.dump(1) + "\n");
}

inline std::pair<ToyModelParams, TrainConfig> load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("v", 0) != 1) throw DataError("checkpoint " + path.string() + ": unsupported version");
  ToyModelParams p;
  p.sheet_height = j.at("sheet_height").get<int>();
  p.sheet_width = j.at("sheet_width").get<int>();
  p.image_height = j.at("image_height").get<int>();
  p.image_width = j.at("image_width").get<int>();
  p.caption_length = j.at("caption_length").get<int>();
  p.vocab_size = j.at("vocab_size").get<int>();
  p.encoder_weights = j.at("encoder_weights").get<std::vector<double>>();
  p.encoder_bias = j.at("encoder_bias").get<std::vector<double>>();
  p.decoder_weights = j.at("decoder_weights").get<std::vector<double>>();
  p.decoder_bias = j.at("decoder_bias").get<std::vector<double>>();
  const bool shapes_ok =
      p.encoder_weights.size() == static_cast<std::size_t>(p.sheet_units()) * p.image_pixels() &&
      p.encoder_bias.size() == static_cast<std::size_t>(p.sheet_units()) &&
      p.decoder_weights.size() ==
          static_cast<std::size_t>(p.caption_length) * p.vocab_size * p.sheet_units() &&
      p.decoder_bias.size() == static_cast<std::size_t>(p.caption_length) * p.vocab_size;
  if (!shapes_ok) throw DataError("checkpoint " + path.string() + ": inconsistent shapes");
  return {std::move(p), train_config_from_json(j.at("train_config"))};
}

// 8-bit binary PGM (P5)
inline std::string image_to_pgm(const std::vector<double>& image, int height, int width) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (double v : image) {
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  return out;
}

inline std::vector<double> image_from_pgm(const std::string& bytes, int& height, int& width) {
  std::istringstream in(bytes);
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0) {
    throw DataError("unsupported PGM header");
  }
  in.get();  // single whitespace after maxval
  std::vector<double> image(static_cast<std::size_t>(height) * width);
  for (double& v : image) {
    const int c = in.get();
    if (c == EOF) throw DataError("truncated PGM data");
    v = static_cast<double>(c) / 255.0;
  }
  return image;
}

// Dataset directory layout: images/<id>.pgm plus an index.jsonl of
// {"id","split","caption"} lines. Pixels round-trip through 8 bits, so a
// reloaded dataset is the training ground truth.
inline std::vector<std::filesystem::path> write_dataset(const ToyDataset& ds,
                                                        const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  std::ostringstream index;
  auto dump = [&](const std::vector<DataPair>& pairs, const char* split) {
    for (const auto& pair : pairs) {
      const auto img_path = dir / "images" / (pair.id + ".pgm");
      write_file(img_path, image_to_pgm(pair.scene.image, pair.scene.height, pair.scene.width));
      written.push_back(img_path);
      index << nlohmann::json{{"id", pair.id},
                              {"split", split},
                              {"caption", caption_to_string(pair.caption)}}
                   .dump()
            << '\n';
    }
  };
  dump(ds.members, "member");
  dump(ds.non_members, "non-member");
  const auto index_path = dir / "index.jsonl";
  write_file(index_path, index.str());
  written.push_back(index_path);
  return written;
}

inline ToyDataset load_dataset(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "index.jsonl"));
  ToyDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(dir.string() + "/index.jsonl:" + std::to_string(lineno) + ": " + e.what());
    }
    DataPair pair;
    pair.id = j.at("id").get<std::string>();
    pair.caption = caption_from_string(j.at("caption").get<std::string>());
    const std::string pgm = read_file(dir / "images" / (pair.id + ".pgm"));
    pair.scene.image = image_from_pgm(pgm, pair.scene.height, pair.scene.width);
    const std::string split = j.at("split").get<std::string>();
    if (split == "member") {
      ds.members.push_back(std::move(pair));
    } else if (split == "non-member") {
      ds.non_members.push_back(std::move(pair));
    } else {
      throw DataError(dir.string() + "/index.jsonl:" + std::to_string(lineno) +
                      ": unknown split '" + split + "'");
    }
  }
  return ds;
}

}  // namespace vlmia
