// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csimap/dataset.hpp"
#include "csimap/estimator.hpp"
#include "csimap/rng.hpp"
#include "csimap/types.hpp"

namespace csimap {

enum class Activation : std::uint8_t { relu = 0, tanh = 1, linear = 2 };
enum class Optimizer : std::uint8_t { sgd = 0, adam = 1 };

// Inverted dropout applied to the post-activation output of dense layer
// `after_layer` (1-based). Rate 0 is exactly the identity in both modes.
struct DropoutSpec {
    std::size_t after_layer = 0;
    double rate = 0.0;
};

// widths = [input, output of dense layer 1, ..., output of last dense layer];
// activations has one entry per dense layer, the last must be linear.
struct MlpSpec {
    std::vector<std::size_t> widths;
    std::vector<Activation> activations;
    std::optional<DropoutSpec> dropout;

    std::size_t num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    void validate() const;
    std::uint64_t hash() const; // over the canonical byte serialization
};

// Hidden layers get `hidden`, the output layer is linear.
MlpSpec make_mlp_spec(std::vector<std::size_t> widths, Activation hidden = Activation::relu,
                      std::optional<DropoutSpec> dropout = std::nullopt);

// Defaults scale with the antenna count m: flattened input is m*8*2 reals,
// output m*2. For m = 32 these give dense widths (512, 256, 128, 64) for the
// direct net, (512, 256, 64, out) for the encoder and (64, 128, 64) for the
// decoder.
MlpSpec default_dnn_spec(std::size_t m = 32, std::optional<double> dropout_rate = std::nullopt);
MlpSpec default_encoder_spec(std::size_t m = 32, std::size_t out_width = 2);
MlpSpec default_decoder_spec(std::size_t m = 32, std::size_t latent_dim = 1);

// Fixed input layout: index (ant*num_subcarriers + sub)*2 holds the real
// part, +1 the imaginary part.
std::vector<double> flatten_input(const CMatrix& h_u);
CMatrix unflatten_input(std::span<const double> x, std::size_t m, std::size_t num_subcarriers);
CVector complexify(std::span<const double> x);
std::vector<double> realify(const CVector& v);

class Mlp {
  public:
    Mlp() = default;
    // Seeded scaled-uniform fan-in init U(-sqrt(3/fan_in), sqrt(3/fan_in)),
    // zero biases.
    Mlp(MlpSpec spec, std::uint64_t seed);

    const MlpSpec& spec() const { return spec_; }

    std::vector<double> forward(std::span<const double> x) const;
    // Post-activation output of dense layer `layer` (eval mode), layer in
    // [1, num_layers]. Used to read latent bottleneck values.
    std::vector<double> activations_after(std::size_t layer, std::span<const double> x) const;

    struct Cache {
        std::vector<std::vector<double>> act; // act[0] = input, act[l+1] = layer l output
        std::vector<std::vector<double>> pre; // pre-activation of each layer
        std::vector<double> drop_scale;       // per-unit keep scale, empty when unused
    };
    std::vector<double> forward_train(std::span<const double> x, Cache& cache,
                                      Rng& drop_rng) const;

    struct Grads {
        std::vector<std::vector<double>> w, b;
        void init(const MlpSpec& spec);
        void zero();
    };
    // Accumulates into g; grad_out is dLoss/dOutput for the cached forward.
    void backward(const Cache& cache, std::span<const double> grad_out, Grads& g) const;

    // weights[l] is widths[l+1] x widths[l], row-major.
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

  private:
    MlpSpec spec_;
};

// ℓ = 1 - |h_d^H w̃|^2/(‖h_d‖^2 ‖w̃‖^2) with w̃ = complexify(raw_output),
// plus the exact gradient with respect to raw_output. The gradient has zero
// component along w̃ (the loss is scale invariant). Zero-norm w̃ throws
// NumericalError; training treats that as an instability diagnostic and
// skips the batch.
struct CosineLoss {
    double loss = 0.0;
    std::vector<double> grad;
};
CosineLoss cosine_loss_and_grad(std::span<const double> raw_output, const CVector& h_d);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    void validate() const;
};

// Training is single-threaded by contract: identical (spec, data, config)
// reproduce identical weights bit for bit.
struct TrainResult {
    Mlp model;
    double input_scale = 1.0; // 1/RMS of the training inputs, applied at predict
    std::vector<double> epoch_loss;
    std::size_t skipped_batches = 0;
};

// loss(output, sample_index, grad_out) fills grad_out and returns the loss.
using LossFn =
    std::function<double(std::span<const double>, std::size_t, std::span<double>)>;
TrainResult train_mlp(const MlpSpec& spec, std::span<const std::vector<double>> inputs,
                      const LossFn& loss, const TrainConfig& cfg);

class MlpEstimator final : public Estimator {
  public:
    MlpEstimator(Mlp model, double input_scale, std::string id,
                 std::optional<std::uint64_t> provenance);
    CVector predict(const CMatrix& h_u) const override;
    std::string id() const override { return id_; }
    std::optional<std::uint64_t> provenance() const override { return provenance_; }
    const Mlp& model() const { return model_; }
    double input_scale() const { return input_scale_; }

  private:
    Mlp model_;
    double input_scale_;
    std::string id_;
    std::optional<std::uint64_t> provenance_;
};

struct TrainedDnn {
    std::unique_ptr<MlpEstimator> estimator;
    std::vector<double> epoch_loss;
    std::size_t skipped_batches = 0;
};

// Direct net: flattened uplink in, downlink estimate out, cosine loss.
TrainedDnn train_dnn(const MlpSpec& spec, std::span<const SamplePair> pairs,
                     const TrainConfig& cfg, std::string id = "dnn");

// Azimuth in (-pi, pi], elevation in [-pi/2, pi/2].
struct AoaLabel {
    double azimuth = 0.0;
    double elevation = 0.0;
};

double canonical_angle(double a); // wrap to (-pi, pi]

// Azimuth: signed angle from the broadside direction to the user direction,
// both projected into the horizontal plane. Elevation: angle of the user
// direction above that plane.
AoaLabel aoa_from_position(const Vec3& position, const ArrayPose& pose);

enum class LatentMode : std::uint8_t { free_latent = 0, azimuth = 1, azimuth_elevation = 2 };

struct EncoderDecoderSpec {
    MlpSpec encoder; // per-angle net in the angle modes
    MlpSpec decoder;
    LatentMode mode = LatentMode::free_latent;
    std::size_t latent_dim = 1;
    void validate() const;
};

EncoderDecoderSpec default_encdec_spec(LatentMode mode, std::size_t latent_dim = 1,
                                       std::size_t m = 32);

// One net per angle, each regressing (sin, cos) so the ±pi wrap cannot
// corrupt the loss; the angle is recovered with atan2.
class AngleEncoder {
  public:
    std::vector<Mlp> nets;
    double input_scale = 1.0;
    LatentMode mode = LatentMode::azimuth;
    std::vector<double> encode(const CMatrix& h_u) const;
    std::size_t num_angles() const { return nets.size(); }
};

class Decoder {
  public:
    Mlp model;
    double input_scale = 1.0;
    std::size_t latent_dim = 1;
    // Angles are canonicalized to (-pi, pi] before the net sees them.
    CVector decode(std::span<const double> angles) const;
};

// epoch_loss, when given, receives one loss series per angle net.
AngleEncoder train_supervised_encoder(const MlpSpec& per_angle_spec,
                                      std::span<const SamplePair> pairs,
                                      std::span<const AoaLabel> labels, LatentMode mode,
                                      const TrainConfig& cfg,
                                      std::vector<std::vector<double>>* epoch_loss = nullptr);

Decoder train_supervised_decoder(const MlpSpec& decoder_spec, std::span<const AoaLabel> labels,
                                 std::span<const CVector> targets, LatentMode mode,
                                 const TrainConfig& cfg,
                                 std::vector<double>* epoch_loss = nullptr);

// predict = normalize(decoder(encoder(h_u))). Both parts stay frozen.
class ComposedEstimator final : public Estimator {
  public:
    ComposedEstimator(AngleEncoder encoder, Decoder decoder, std::string id,
                      std::optional<std::uint64_t> provenance);
    CVector predict(const CMatrix& h_u) const override;
    std::string id() const override { return id_; }
    std::optional<std::uint64_t> provenance() const override { return provenance_; }
    const AngleEncoder& encoder() const { return encoder_; }
    const Decoder& decoder() const { return decoder_; }

  private:
    AngleEncoder encoder_;
    Decoder decoder_;
    std::string id_;
    std::optional<std::uint64_t> provenance_;
};

std::unique_ptr<ComposedEstimator> compose(AngleEncoder encoder, Decoder decoder, std::string id,
                                           std::optional<std::uint64_t> provenance);

// Free latent: encoder and decoder concatenated into one net, trained end to
// end with the cosine loss. The latent sits after dense layer
// encoder.num_layers() and can be read with latent_values.
TrainedDnn train_free_encdec(const EncoderDecoderSpec& spec, std::span<const SamplePair> pairs,
                             const TrainConfig& cfg, std::string id = "encdec_free");

struct TrainedEncDec {
    std::unique_ptr<ComposedEstimator> estimator;
    std::vector<std::vector<double>> encoder_epoch_loss; // one series per angle net
    std::vector<double> decoder_epoch_loss;
};

// Angle latents: encoder and decoder are trained separately on position
// labels, then composed frozen. fine_tune is reserved and rejected: joint
// training after supervised pre-training is deliberately not offered.
TrainedEncDec train_angle_encdec(const EncoderDecoderSpec& spec,
                                 std::span<const SamplePair> pairs, const ArrayPose& pose,
                                 const TrainConfig& cfg, std::string id, bool fine_tune = false);

std::vector<double> latent_values(const MlpEstimator& est, std::size_t boundary_layer,
                                  const CMatrix& h_u);

// Pearson correlation between the first latent coordinate and the azimuth
// label, a diagnostic for the free-latent bottleneck.
double latent_azimuth_correlation(const MlpEstimator& est, std::size_t boundary_layer,
                                  std::span<const SamplePair> pairs, const ArrayPose& pose);

// Versioned binary checkpoints. Each net block records the spec hash; loads
// reject a mismatch. Constant, direct-net and composed estimators round-trip.
void save_checkpoint(const std::string& path, const Estimator& estimator);
std::unique_ptr<Estimator> load_checkpoint(const std::string& path);

} // namespace csimap
