#include "fluidsim/mlp.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fluidsim/error.hpp"

namespace fluidsim {

namespace {

// Flat layout: [W1 (hidden x input, row-major) | b1 | W2 (classes x hidden,
// row-major) | b2]. Maps below give matrix views into the flat vector.
struct ParamView {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w1;
    Eigen::Map<const Vector> b1;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w2;
    Eigen::Map<const Vector> b2;
};

ParamView view(const ModelParams& m) {
    const auto& a = m.arch;
    const double* p = m.values.data();
    return ParamView{
        {p, a.hidden, a.input_dim},
        {p + a.hidden * a.input_dim, a.hidden},
        {p + a.hidden * a.input_dim + a.hidden, a.classes, a.hidden},
        {p + a.hidden * a.input_dim + a.hidden + a.classes * a.hidden, a.classes}};
}

Matrix softmax_rows(Matrix logits) {
    for (int i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - m).exp();
        logits.row(i) /= logits.row(i).sum();
    }
    return logits;
}

void check_arch(const ModelParams& m) {
    if (m.values.size() != m.arch.param_count())
        throw ValidationError("model.values: size does not match architecture");
}

} // namespace

ModelParams mlp_init(const MlpArch& arch, RngStream rng) {
    ModelParams m{arch, Vector(arch.param_count())};
    // Scaled-normal init, layer-wise fan-in scaling.
    const double s1 = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(arch.hidden));
    int i = 0;
    for (; i < arch.hidden * arch.input_dim; ++i) m.values[i] = s1 * rng.normal();
    for (; i < arch.hidden * arch.input_dim + arch.hidden; ++i) m.values[i] = 0.0;
    for (; i < arch.param_count() - arch.classes; ++i) m.values[i] = s2 * rng.normal();
    for (; i < arch.param_count(); ++i) m.values[i] = 0.0;
    return m;
}

ModelParams mlp_zero(const MlpArch& arch) {
    return ModelParams{arch, Vector::Zero(arch.param_count())};
}

Matrix mlp_logits(const ModelParams& model, const Matrix& features) {
    check_arch(model);
    const auto p = view(model);
    Matrix hidden = ((features * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh();
    return (hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
}

double mlp_loss(const ModelParams& model, const Matrix& features,
                const std::vector<int>& labels) {
    const Matrix probs = softmax_rows(mlp_logits(model, features));
    double loss = 0.0;
    for (int i = 0; i < probs.rows(); ++i)
        loss -= std::log(std::max(probs(i, labels[i]), 1e-300));
    return loss / probs.rows();
}

Vector mlp_gradient(const ModelParams& model, const Matrix& features,
                    const std::vector<int>& labels) {
    check_arch(model);
    const auto& a = model.arch;
    const auto p = view(model);
    const int n = static_cast<int>(labels.size());

    Matrix hidden = ((features * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh();
    Matrix probs = softmax_rows((hidden * p.w2.transpose()).rowwise() + p.b2.transpose());
    for (int i = 0; i < n; ++i) probs(i, labels[i]) -= 1.0; // dL/dlogits * n
    probs /= static_cast<double>(n);

    Matrix grad_w2 = probs.transpose() * hidden;                  // classes x hidden
    Vector grad_b2 = probs.colwise().sum().transpose();           // classes
    Matrix back = (probs * p.w2).array() * (1.0 - hidden.array().square()); // n x hidden
    Matrix grad_w1 = back.transpose() * features;                 // hidden x input
    Vector grad_b1 = back.colwise().sum().transpose();            // hidden

    Vector g(a.param_count());
    int off = 0;
    for (int r = 0; r < a.hidden; ++r)
        for (int c = 0; c < a.input_dim; ++c) g[off++] = grad_w1(r, c);
    for (int r = 0; r < a.hidden; ++r) g[off++] = grad_b1[r];
    for (int r = 0; r < a.classes; ++r)
        for (int c = 0; c < a.hidden; ++c) g[off++] = grad_w2(r, c);
    for (int r = 0; r < a.classes; ++r) g[off++] = grad_b2[r];
    return g;
}

ModelParams local_train(const ModelParams& model, const Dataset& data,
                        int epochs, double learning_rate, int batch_size,
                        RngStream rng) {
    check_arch(model);
    if (data.size() == 0) throw ValidationError("local_train: dataset must be non-empty");
    if (data.features.cols() != model.arch.input_dim)
        throw ValidationError("local_train: dataset dimension does not match architecture");
    if (batch_size <= 0) throw ValidationError("local_train: batch_size must be positive");

    ModelParams out = model;
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (int start = 0; start < data.size(); start += batch_size) {
            const int count = std::min(batch_size, data.size() - start);
            Matrix batch(count, model.arch.input_dim);
            std::vector<int> labels(count);
            for (int i = 0; i < count; ++i) {
                batch.row(i) = data.features.row(order[start + i]);
                labels[i] = data.labels[order[start + i]];
            }
            const Vector g = mlp_gradient(out, batch, labels);
            out.values -= learning_rate * g;
        }
        // Unclamped epoch loss: exact-zero class probability or non-finite
        // parameters both mean the step size destroyed the model.
        double epoch_loss = 0.0;
        if (out.values.allFinite()) {
            const Matrix probs = softmax_rows(mlp_logits(out, data.features));
            for (int i = 0; i < data.size(); ++i)
                epoch_loss -= std::log(probs(i, data.labels[i]));
        } else {
            epoch_loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error(
                "local_train: non-finite loss after epoch " + std::to_string(e + 1) +
                " (learning rate too high)");
        }
    }
    return out;
}

double evaluate(const ModelParams& model, const Dataset& test_set) {
    if (test_set.size() == 0) return 0.0;
    const Matrix logits = mlp_logits(model, test_set.features);
    int correct = 0;
    for (int i = 0; i < logits.rows(); ++i) {
        int arg = 0;
        for (int c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, arg)) arg = c;
        if (arg == test_set.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / test_set.size();
}

ModelParams fedavg(const std::vector<ModelParams>& models,
                   const std::vector<double>& weights) {
    if (models.empty() || models.size() != weights.size())
        throw ValidationError("fedavg: need equally many models and weights");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ValidationError("fedavg: weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw ValidationError("fedavg: weights must sum to a positive value");
    for (const auto& m : models)
        if (!(m.arch == models.front().arch))
            throw ValidationError("fedavg: architecture mismatch");

    ModelParams out = mlp_zero(models.front().arch);
    for (std::size_t i = 0; i < models.size(); ++i)
        out.values += (weights[i] / total) * models[i].values;
    return out;
}

} // namespace fluidsim
