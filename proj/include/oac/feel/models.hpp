// include/oac/feel/models.hpp - Small differentiable models with hand-written gradients.

#pragma once

#include "oac/error.hpp"
#include "oac/feel/data.hpp"
#include "oac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oac::feel {

/// Flat parameter vector w in R^Q; losses and gradients are averaged over a batch.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string_view name() const = 0;
    virtual std::size_t parameter_count() const = 0;
    virtual std::vector<double> initial_parameters(std::uint64_t seed) const = 0;

    /// Mean loss over `batch`; `grad` receives the mean gradient.
    virtual double loss_and_gradient(std::span<const double> w, const Dataset &data, std::span<const std::size_t> batch,
                                     std::span<double> grad) const = 0;

    virtual int predict(std::span<const double> w, std::span<const double> x) const = 0;

    double accuracy(std::span<const double> w, const Dataset &data) const {
        if (data.size() == 0) {
            return 0.0;
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            correct += predict(w, data.row(i)) == data.labels[i] ? 1 : 0;
        }
        return static_cast<double>(correct) / static_cast<double>(data.size());
    }

protected:
    void check(std::span<const double> w, std::span<double> grad, std::span<const std::size_t> batch) const {
        oac::detail::require(w.size() == parameter_count() && grad.size() == parameter_count(), ErrorKind::shape,
                             "parameter vector length does not match the model");
        oac::detail::require(!batch.empty(), ErrorKind::config, "empty batch");
    }
};

namespace model_detail {

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline void glorot(std::span<double> w, int fan_in, int fan_out, KeyedStream &stream) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double &v : w) {
        v = stream.uniform(-limit, limit);
    }
}

/// In-place softmax; returns log-sum-exp.
inline double softmax(std::span<double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double &v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double &v : z) {
        v /= sum;
    }
    return top + std::log(sum);
}

} // namespace model_detail

/// Squared-error regression y ~ w^T x (no intercept).
class LinearRegression final : public Model {
public:
    explicit LinearRegression(int features) : features_(features) {}

    std::string_view name() const override { return "linear"; }
    std::size_t parameter_count() const override { return static_cast<std::size_t>(features_); }

    std::vector<double> initial_parameters(std::uint64_t) const override { return std::vector<double>(parameter_count(), 0.0); }

    double loss_and_gradient(std::span<const double> w, const Dataset &data, std::span<const std::size_t> batch,
                             std::span<double> grad) const override {
        check(w, grad, batch);
        oac::detail::require(data.targets.size() == data.size(), ErrorKind::config, "regression needs targets");
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t idx : batch) {
            const auto x = data.row(idx);
            double pred = 0.0;
            for (std::size_t f = 0; f < x.size(); ++f) {
                pred += w[f] * x[f];
            }
            const double r = pred - data.targets[idx];
            loss += r * r;
            for (std::size_t f = 0; f < x.size(); ++f) {
                grad[f] += 2.0 * r * x[f];
            }
        }
        const auto n = static_cast<double>(batch.size());
        for (double &g : grad) {
            g /= n;
        }
        return loss / n;
    }

    int predict(std::span<const double>, std::span<const double>) const override { return 0; }

private:
    int features_;
};

/// Multinomial logistic regression: softmax(W x + b).
class SoftmaxRegression final : public Model {
public:
    SoftmaxRegression(int features, int classes) : features_(features), classes_(classes) {}

    std::string_view name() const override { return "softmax"; }
    std::size_t parameter_count() const override { return static_cast<std::size_t>(classes_) * (features_ + 1); }

    std::vector<double> initial_parameters(std::uint64_t seed) const override {
        std::vector<double> w(parameter_count(), 0.0);
        KeyedStream stream(seed, StreamRole::init, {0});
        model_detail::glorot(std::span(w).first(static_cast<std::size_t>(classes_) * features_), features_, classes_, stream);
        return w;
    }

    double loss_and_gradient(std::span<const double> w, const Dataset &data, std::span<const std::size_t> batch,
                             std::span<double> grad) const override {
        check(w, grad, batch);
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<double> z(static_cast<std::size_t>(classes_));
        const std::size_t bias = static_cast<std::size_t>(classes_) * features_;
        double loss = 0.0;
        for (std::size_t idx : batch) {
            const auto x = data.row(idx);
            logits(w, x, z);
            const double lse = model_detail::softmax(z);
            const int y = data.labels[idx];
            loss += lse - logit_of(w, x, y);
            z[static_cast<std::size_t>(y)] -= 1.0;
            for (int c = 0; c < classes_; ++c) {
                const double d = z[static_cast<std::size_t>(c)];
                double *g = grad.data() + static_cast<std::size_t>(c) * features_;
                for (int f = 0; f < features_; ++f) {
                    g[f] += d * x[static_cast<std::size_t>(f)];
                }
                grad[bias + static_cast<std::size_t>(c)] += d;
            }
        }
        const auto n = static_cast<double>(batch.size());
        for (double &g : grad) {
            g /= n;
        }
        return loss / n;
    }

    int predict(std::span<const double> w, std::span<const double> x) const override {
        std::vector<double> z(static_cast<std::size_t>(classes_));
        logits(w, x, z);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

private:
    void logits(std::span<const double> w, std::span<const double> x, std::span<double> z) const {
        for (int c = 0; c < classes_; ++c) {
            z[static_cast<std::size_t>(c)] = logit_of(w, x, c);
        }
    }

    double logit_of(std::span<const double> w, std::span<const double> x, int c) const {
        const double *row = w.data() + static_cast<std::size_t>(c) * features_;
        double s = w[static_cast<std::size_t>(classes_) * features_ + static_cast<std::size_t>(c)];
        for (int f = 0; f < features_; ++f) {
            s += row[f] * x[static_cast<std::size_t>(f)];
        }
        return s;
    }

    int features_;
    int classes_;
};

/// One hidden ReLU layer followed by softmax.
/// Layout: W1 (hidden x features), b1, W2 (classes x hidden), b2.
class Mlp final : public Model {
public:
    Mlp(int features, int hidden, int classes) : features_(features), hidden_(hidden), classes_(classes) {}

    std::string_view name() const override { return "mlp"; }
    std::size_t parameter_count() const override {
        return static_cast<std::size_t>(hidden_) * features_ + hidden_ + static_cast<std::size_t>(classes_) * hidden_ + classes_;
    }

    std::vector<double> initial_parameters(std::uint64_t seed) const override {
        std::vector<double> w(parameter_count(), 0.0);
        KeyedStream stream(seed, StreamRole::init, {0});
        model_detail::glorot(std::span(w).subspan(w1(), static_cast<std::size_t>(hidden_) * features_), features_, hidden_, stream);
        model_detail::glorot(std::span(w).subspan(w2(), static_cast<std::size_t>(classes_) * hidden_), hidden_, classes_, stream);
        return w;
    }

    double loss_and_gradient(std::span<const double> w, const Dataset &data, std::span<const std::size_t> batch,
                             std::span<double> grad) const override {
        check(w, grad, batch);
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<double> h(static_cast<std::size_t>(hidden_));
        std::vector<double> z(static_cast<std::size_t>(classes_));
        std::vector<double> dh(static_cast<std::size_t>(hidden_));
        double loss = 0.0;
        for (std::size_t idx : batch) {
            const auto x = data.row(idx);
            forward(w, x, h, z);
            const int y = data.labels[idx];
            const double zy = z[static_cast<std::size_t>(y)];
            loss += model_detail::softmax(z) - zy;
            z[static_cast<std::size_t>(y)] -= 1.0;
            std::fill(dh.begin(), dh.end(), 0.0);
            for (int c = 0; c < classes_; ++c) {
                const double d = z[static_cast<std::size_t>(c)];
                const std::size_t row = w2() + static_cast<std::size_t>(c) * hidden_;
                for (int j = 0; j < hidden_; ++j) {
                    grad[row + static_cast<std::size_t>(j)] += d * h[static_cast<std::size_t>(j)];
                    dh[static_cast<std::size_t>(j)] += d * w[row + static_cast<std::size_t>(j)];
                }
                grad[b2() + static_cast<std::size_t>(c)] += d;
            }
            for (int j = 0; j < hidden_; ++j) {
                if (h[static_cast<std::size_t>(j)] <= 0.0) {
                    continue;
                }
                const double d = dh[static_cast<std::size_t>(j)];
                const std::size_t row = w1() + static_cast<std::size_t>(j) * features_;
                for (int f = 0; f < features_; ++f) {
                    grad[row + static_cast<std::size_t>(f)] += d * x[static_cast<std::size_t>(f)];
                }
                grad[b1() + static_cast<std::size_t>(j)] += d;
            }
        }
        const auto n = static_cast<double>(batch.size());
        for (double &g : grad) {
            g /= n;
        }
        return loss / n;
    }

    int predict(std::span<const double> w, std::span<const double> x) const override {
        std::vector<double> h(static_cast<std::size_t>(hidden_));
        std::vector<double> z(static_cast<std::size_t>(classes_));
        forward(w, x, h, z);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

private:
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return static_cast<std::size_t>(hidden_) * features_; }
    std::size_t w2() const { return b1() + static_cast<std::size_t>(hidden_); }
    std::size_t b2() const { return w2() + static_cast<std::size_t>(classes_) * hidden_; }

    void forward(std::span<const double> w, std::span<const double> x, std::span<double> h, std::span<double> z) const {
        for (int j = 0; j < hidden_; ++j) {
            const double *row = w.data() + w1() + static_cast<std::size_t>(j) * features_;
            double s = w[b1() + static_cast<std::size_t>(j)];
            for (int f = 0; f < features_; ++f) {
                s += row[f] * x[static_cast<std::size_t>(f)];
            }
            h[static_cast<std::size_t>(j)] = std::max(0.0, s);
        }
        for (int c = 0; c < classes_; ++c) {
            const double *row = w.data() + w2() + static_cast<std::size_t>(c) * hidden_;
            double s = w[b2() + static_cast<std::size_t>(c)];
            for (int j = 0; j < hidden_; ++j) {
                s += row[j] * h[static_cast<std::size_t>(j)];
            }
            z[static_cast<std::size_t>(c)] = s;
        }
    }

    int features_;
    int hidden_;
    int classes_;
};

/// conv(k x k, `filters` maps, valid) -> ReLU -> 2x2 max-pool -> dense softmax.
/// Layout: kernels (filters x k x k), conv bias (filters), dense W (classes x pooled), dense b.
class Cnn final : public Model {
public:
    Cnn(int height, int width, int filters, int kernel, int classes)
        : height_(height), width_(width), filters_(filters), kernel_(kernel), classes_(classes) {
        oac::detail::require(height > kernel && width > kernel, ErrorKind::config, "image smaller than the kernel");
        oac::detail::require((height - kernel + 1) % 2 == 0 && (width - kernel + 1) % 2 == 0, ErrorKind::config,
                             "convolution output must have even height and width for 2x2 pooling");
    }

    std::string_view name() const override { return "cnn"; }
    std::size_t parameter_count() const override { return dense_b() + static_cast<std::size_t>(classes_); }

    std::vector<double> initial_parameters(std::uint64_t seed) const override {
        std::vector<double> w(parameter_count(), 0.0);
        KeyedStream stream(seed, StreamRole::init, {0});
        const int fan = kernel_ * kernel_;
        model_detail::glorot(std::span(w).first(static_cast<std::size_t>(filters_) * fan), fan, filters_ * fan, stream);
        model_detail::glorot(std::span(w).subspan(dense_w(), static_cast<std::size_t>(classes_) * pooled_size()),
                             static_cast<int>(pooled_size()), classes_, stream);
        return w;
    }

    double loss_and_gradient(std::span<const double> w, const Dataset &data, std::span<const std::size_t> batch,
                             std::span<double> grad) const override {
        check(w, grad, batch);
        std::fill(grad.begin(), grad.end(), 0.0);
        Buffers buf(*this);
        double loss = 0.0;
        const int ow = conv_w();
        const int ph = conv_h() / 2;
        const int pw = ow / 2;
        for (std::size_t idx : batch) {
            const auto x = data.row(idx);
            forward(w, x, buf);
            const int y = data.labels[idx];
            const double zy = buf.logits[static_cast<std::size_t>(y)];
            loss += model_detail::softmax(buf.logits) - zy;
            buf.logits[static_cast<std::size_t>(y)] -= 1.0;

            std::fill(buf.dpooled.begin(), buf.dpooled.end(), 0.0);
            for (int c = 0; c < classes_; ++c) {
                const double d = buf.logits[static_cast<std::size_t>(c)];
                const std::size_t row = dense_w() + static_cast<std::size_t>(c) * pooled_size();
                for (std::size_t p = 0; p < pooled_size(); ++p) {
                    grad[row + p] += d * buf.pooled[p];
                    buf.dpooled[p] += d * w[row + p];
                }
                grad[dense_b() + static_cast<std::size_t>(c)] += d;
            }
            // Route through max-pool (argmax) and ReLU to the conv weights.
            for (int f = 0; f < filters_; ++f) {
                double *gk = grad.data() + static_cast<std::size_t>(f) * kernel_ * kernel_;
                for (int pi = 0; pi < ph; ++pi) {
                    for (int pj = 0; pj < pw; ++pj) {
                        const std::size_t p = (static_cast<std::size_t>(f) * ph + pi) * pw + pj;
                        const double d = buf.dpooled[p];
                        if (buf.pooled[p] <= 0.0 || d == 0.0) {
                            continue;
                        }
                        const int arg = buf.argmax[p];
                        const int ci = arg / ow;
                        const int cj = arg % ow;
                        for (int u = 0; u < kernel_; ++u) {
                            const double *xr = x.data() + static_cast<std::size_t>(ci + u) * width_ + cj;
                            for (int v = 0; v < kernel_; ++v) {
                                gk[u * kernel_ + v] += d * xr[v];
                            }
                        }
                        grad[conv_b() + static_cast<std::size_t>(f)] += d;
                    }
                }
            }
        }
        const auto n = static_cast<double>(batch.size());
        for (double &g : grad) {
            g /= n;
        }
        return loss / n;
    }

    int predict(std::span<const double> w, std::span<const double> x) const override {
        Buffers buf(*this);
        forward(w, x, buf);
        return static_cast<int>(std::max_element(buf.logits.begin(), buf.logits.end()) - buf.logits.begin());
    }

private:
    struct Buffers {
        explicit Buffers(const Cnn &m)
            : conv(static_cast<std::size_t>(m.filters_) * m.conv_h() * m.conv_w()), pooled(m.pooled_size()),
              dpooled(m.pooled_size()), argmax(m.pooled_size()), logits(static_cast<std::size_t>(m.classes_)) {}
        std::vector<double> conv;
        std::vector<double> pooled;
        std::vector<double> dpooled;
        std::vector<int> argmax; // index into the conv map of filter f
        std::vector<double> logits;
    };

    int conv_h() const { return height_ - kernel_ + 1; }
    int conv_w() const { return width_ - kernel_ + 1; }
    std::size_t pooled_size() const { return static_cast<std::size_t>(filters_) * (conv_h() / 2) * (conv_w() / 2); }
    std::size_t conv_b() const { return static_cast<std::size_t>(filters_) * kernel_ * kernel_; }
    std::size_t dense_w() const { return conv_b() + static_cast<std::size_t>(filters_); }
    std::size_t dense_b() const { return dense_w() + static_cast<std::size_t>(classes_) * pooled_size(); }

    void forward(std::span<const double> w, std::span<const double> x, Buffers &buf) const {
        const int oh = conv_h();
        const int ow = conv_w();
        for (int f = 0; f < filters_; ++f) {
            const double *k = w.data() + static_cast<std::size_t>(f) * kernel_ * kernel_;
            const double b = w[conv_b() + static_cast<std::size_t>(f)];
            double *out = buf.conv.data() + static_cast<std::size_t>(f) * oh * ow;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    double s = b;
                    for (int u = 0; u < kernel_; ++u) {
                        const double *xr = x.data() + static_cast<std::size_t>(i + u) * width_ + j;
                        for (int v = 0; v < kernel_; ++v) {
                            s += k[u * kernel_ + v] * xr[v];
                        }
                    }
                    out[i * ow + j] = std::max(0.0, s);
                }
            }
            const int ph = oh / 2;
            const int pw = ow / 2;
            for (int pi = 0; pi < ph; ++pi) {
                for (int pj = 0; pj < pw; ++pj) {
                    int best = (2 * pi) * ow + 2 * pj;
                    for (int a = 0; a < 2; ++a) {
                        for (int c = 0; c < 2; ++c) {
                            const int cand = (2 * pi + a) * ow + 2 * pj + c;
                            if (out[cand] > out[best]) {
                                best = cand;
                            }
                        }
                    }
                    const std::size_t p = (static_cast<std::size_t>(f) * ph + pi) * pw + pj;
                    buf.pooled[p] = out[best];
                    buf.argmax[p] = best;
                }
            }
        }
        for (int c = 0; c < classes_; ++c) {
            const double *row = w.data() + dense_w() + static_cast<std::size_t>(c) * pooled_size();
            double s = w[dense_b() + static_cast<std::size_t>(c)];
            for (std::size_t p = 0; p < pooled_size(); ++p) {
                s += row[p] * buf.pooled[p];
            }
            buf.logits[static_cast<std::size_t>(c)] = s;
        }
    }

    int height_;
    int width_;
    int filters_;
    int kernel_;
    int classes_;
};

} // namespace oac::feel
