#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fluidsim/simcore.hpp"

namespace fluidsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One-hidden-layer perceptron: input_dim -> hidden (tanh) -> classes
/// (softmax cross-entropy).
struct MlpArch {
    int input_dim = 0;
    int hidden = 32;
    int classes = 0;

    bool operator==(const MlpArch&) const = default;
    int param_count() const {
        return hidden * input_dim + hidden + classes * hidden + classes;
    }
};

/// Flat parameter vector plus its architecture descriptor. Two ModelParams
/// are combinable only when the descriptors match.
struct ModelParams {
    MlpArch arch;
    Vector values;

    double payload_bytes() const { return 4.0 * arch.param_count(); }
};

struct Dataset {
    Matrix features;         // one sample per row
    std::vector<int> labels; // class ids, same length as rows

    int size() const { return static_cast<int>(labels.size()); }
};

ModelParams mlp_init(const MlpArch& arch, RngStream rng);
ModelParams mlp_zero(const MlpArch& arch);

/// Class logits for a batch (rows of `features`).
Matrix mlp_logits(const ModelParams& model, const Matrix& features);

/// Mean softmax cross-entropy over the batch.
double mlp_loss(const ModelParams& model, const Matrix& features,
                const std::vector<int>& labels);

/// Analytic gradient of mlp_loss with respect to the flat parameter vector.
Vector mlp_gradient(const ModelParams& model, const Matrix& features,
                    const std::vector<int>& labels);

/// Mini-batch SGD. Returns updated parameters; the input model is untouched.
/// Throws std::runtime_error if the loss turns non-finite (learning rate too
/// high for the data).
ModelParams local_train(const ModelParams& model, const Dataset& data,
                        int epochs, double learning_rate, int batch_size,
                        RngStream rng);

/// Fraction of argmax-correct predictions (ties resolve to the lowest class).
double evaluate(const ModelParams& model, const Dataset& test_set);

/// Component-wise weighted average with normalized weights.
/// Weights must be non-negative with a positive sum.
ModelParams fedavg(const std::vector<ModelParams>& models,
                   const std::vector<double>& weights);

} // namespace fluidsim
