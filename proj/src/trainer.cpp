#include <berlu/trainer.hpp>
#include <berlu/rng.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace berlu {

namespace {
constexpr double kInitStd = 0.02;
constexpr double kInitAlpha = 0.01;
}  // namespace

ActivationSpec DenseNet::layer_activation(std::size_t l) const {
    if (alphas.empty())
        return activation;
    return activation.with_alpha(alphas.at(l));
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = alphas.size();
    for (const auto& layer : layers)
        n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
    return n;
}

DenseNet init_net(const std::vector<int>& dims, const ActivationSpec& activation, std::uint64_t seed) {
    if (dims.size() < 2)
        throw std::invalid_argument("init_net: need at least input and output dims");
    for (int d : dims)
        if (d <= 0)
            throw std::invalid_argument("init_net: dimensions must be positive");

    Rng rng(derive_seed(seed, 0x1417));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto truncated = [&] {
        double z;
        do {
            z = normal(rng);
        } while (std::abs(z) > 2.0);
        return kInitStd * z;
    };

    DenseNet net;
    net.activation = activation;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.weights.resize(dims[l + 1], dims[l]);
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
                layer.weights(i, j) = truncated();
        layer.biases = Vector::Zero(dims[l + 1]);
        net.layers.push_back(std::move(layer));
    }
    if (activation.is_parametric())
        net.alphas.assign(net.hidden_layers(), kInitAlpha);
    return net;
}

// ---------------------------------------------------------------------------

Gradients Gradients::zeros_like(const DenseNet& net) {
    Gradients g;
    for (const auto& layer : net.layers) {
        g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
        g.biases.push_back(Vector::Zero(layer.biases.size()));
    }
    g.alphas.assign(net.alphas.size(), 0.0);
    return g;
}

double Gradients::norm() const {
    double s = 0.0;
    for (const auto& w : weights)
        s += w.squaredNorm();
    for (const auto& b : biases)
        s += b.squaredNorm();
    for (double a : alphas)
        s += a * a;
    return std::sqrt(s);
}

void Gradients::scale(double factor) {
    for (auto& w : weights)
        w *= factor;
    for (auto& b : biases)
        b *= factor;
    for (double& a : alphas)
        a *= factor;
}

NonFiniteActivation::NonFiniteActivation(std::size_t layer)
    : std::runtime_error("non-finite pre-activations at layer " + std::to_string(layer)), layer_(layer) {}

TrainingDiverged::TrainingDiverged(int epoch)
    : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)), epoch_(epoch) {}

// ---------------------------------------------------------------------------

namespace {

Matrix affine(const DenseLayer& layer, const Matrix& h) {
    Matrix z = h * layer.weights.transpose();
    z.rowwise() += layer.biases.transpose();
    return z;
}

Matrix activate(const ActivationSpec& spec, const Matrix& z, bool derivative_only = false) {
    Matrix out(z.rows(), z.cols());
    std::span<const double> in(z.data(), static_cast<std::size_t>(z.size()));
    std::span<double> dst(out.data(), static_cast<std::size_t>(out.size()));
    if (derivative_only)
        apply_dx(spec, in, dst);
    else
        apply_forward(spec, in, dst);
    return out;
}

void check_finite(const Matrix& z, std::size_t layer) {
    if (!z.allFinite())
        throw NonFiniteActivation(layer);
}

}  // namespace

Matrix predict(const DenseNet& net, const Matrix& x) {
    Matrix h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix z = affine(net.layers[l], h);
        check_finite(z, l);
        h = l + 1 < net.layers.size() ? activate(net.layer_activation(l), z) : std::move(z);
    }
    return h;
}

LossGrad forward_backward(const DenseNet& net, const Matrix& batch_x, std::span<const int> batch_y) {
    const auto batch = static_cast<Eigen::Index>(batch_y.size());
    if (batch == 0 || batch_x.rows() != batch)
        throw std::invalid_argument("forward_backward: batch is empty or rows differ from labels");
    const std::size_t depth = net.layers.size();

    // Forward, keeping every layer input and pre-activation.
    std::vector<Matrix> inputs(depth);
    std::vector<Matrix> pre(depth);
    Matrix h = batch_x;
    for (std::size_t l = 0; l < depth; ++l) {
        inputs[l] = h;
        pre[l] = affine(net.layers[l], h);
        check_finite(pre[l], l);
        if (l + 1 < depth)
            h = activate(net.layer_activation(l), pre[l]);
    }

    const Matrix& logits = pre.back();
    const Eigen::Index classes = logits.cols();
    Matrix delta(batch, classes);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int y = batch_y[static_cast<std::size_t>(i)];
        if (y < 0 || y >= classes)
            throw std::invalid_argument("forward_backward: label out of range");
        const double m = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        const double sum = e.sum();
        loss += std::log(sum) + m - logits(i, y);
        delta.row(i) = e / sum;
        delta(i, y) -= 1.0;
    }
    loss /= static_cast<double>(batch);
    delta /= static_cast<double>(batch);

    LossGrad out{loss, Gradients::zeros_like(net)};
    for (std::size_t l = depth; l-- > 0;) {
        if (l + 1 < depth) {
            // delta currently holds dL/dh for the output of hidden layer l.
            const ActivationSpec spec = net.layer_activation(l);
            const Matrix& z = pre[l];
            if (!out.grads.alphas.empty()) {
                double ga = 0.0;
                for (Eigen::Index i = 0; i < z.size(); ++i)
                    ga += delta.data()[i] * alpha_derivative(spec, z.data()[i]);
                out.grads.alphas[l] = ga;
            }
            delta = delta.cwiseProduct(activate(spec, z, true));
        }
        out.grads.weights[l] = delta.transpose() * inputs[l];
        out.grads.biases[l] = delta.colwise().sum().transpose();
        if (l > 0)
            delta = delta * net.layers[l].weights;
    }
    return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs <= 0 || warmup_epochs < 0 || warmup_epochs >= epochs)
        throw std::invalid_argument("train config: require epochs > warmup_epochs >= 0");
    if (batch_size <= 0)
        throw std::invalid_argument("train config: batch_size must be positive");
    for (double r : {base_lr, grad_clip, adam_eps})
        if (!(r > 0.0) || !std::isfinite(r))
            throw std::invalid_argument("train config: rates must be positive");
    if (!(weight_decay >= 0.0))
        throw std::invalid_argument("train config: weight_decay must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("train config: Adam betas must lie in [0,1)");
}

AdamState AdamState::for_net(const DenseNet& net) {
    return {Gradients::zeros_like(net), Gradients::zeros_like(net), 0};
}

void adamw_step(DenseNet& net, const Gradients& g, AdamState& st, double lr, const TrainConfig& cfg) {
    if (g.weights.size() != net.layers.size() || st.m.weights.size() != net.layers.size() ||
        g.alphas.size() != net.alphas.size() || st.m.alphas.size() != net.alphas.size())
        throw std::invalid_argument("adamw_step: gradient/state shape mismatch");
    st.step += 1;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
    };

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        if (layer.weights.rows() != g.weights[l].rows() || layer.weights.cols() != g.weights[l].cols())
            throw std::invalid_argument("adamw_step: weight gradient shape mismatch");
        layer.weights *= 1.0 - lr * cfg.weight_decay;
        update(layer.weights, g.weights[l], st.m.weights[l], st.v.weights[l]);
        update(layer.biases, g.biases[l], st.m.biases[l], st.v.biases[l]);
    }
    for (std::size_t k = 0; k < net.alphas.size(); ++k) {
        double& m = st.m.alphas[k];
        double& v = st.v.alphas[k];
        m = b1 * m + (1.0 - b1) * g.alphas[k];
        v = b2 * v + (1.0 - b2) * g.alphas[k] * g.alphas[k];
        net.alphas[k] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
    }
}

double lr_at(long step, long total_steps, long warmup_steps, double base_lr) {
    if (step < 0 || step >= total_steps)
        throw std::out_of_range("lr_at: step outside [0, total_steps)");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw std::out_of_range("lr_at: warmup_steps must lie in [0, total_steps)");
    if (step < warmup_steps)
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    const long span = total_steps - 1 - warmup_steps;
    if (span == 0)
        return base_lr;
    const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

Gradients clip_gradients(Gradients grads, double threshold) {
    if (!(threshold > 0.0))
        throw std::invalid_argument("clip_gradients: threshold must be positive");
    const double n = grads.norm();
    if (n > threshold)
        grads.scale(threshold / n);
    return grads;
}

// ---------------------------------------------------------------------------

namespace {

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

}  // namespace

double accuracy(const DenseNet& net, const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty())
        return 0.0;
    const Matrix logits = predict(net, gather_rows(ds.features, idx));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        Eigen::Index best;
        logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
        if (best == ds.labels[idx[i]])
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

RunReport train(DenseNet& net, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    if (ds.split.train_idx.empty())
        throw std::invalid_argument("train: empty training split");
    if (net.layers.empty() || static_cast<std::size_t>(net.layers.front().weights.cols()) != ds.dims() ||
        net.layers.back().weights.rows() < ds.classes)
        throw std::invalid_argument("train: network shape does not match the dataset");

    const auto start = std::chrono::steady_clock::now();
    const std::size_t n_train = ds.split.train_idx.size();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const long batches = static_cast<long>((n_train + bs - 1) / bs);
    const long total = batches * cfg.epochs;
    const long warmup = batches * cfg.warmup_epochs;

    AdamState state = AdamState::for_net(net);
    RunReport report;
    std::vector<std::size_t> order = ds.split.train_idx;
    std::vector<int> labels;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order = ds.split.train_idx;
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_in_place(order, rng);

        EpochMetrics m;
        m.lr = lr_at(step, total, warmup, cfg.base_lr);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n_train; begin += bs) {
            const std::size_t end = std::min(n_train, begin + bs);
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            labels.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                labels[i] = ds.labels[idx[i]];
            LossGrad lg;
            try {
                lg = forward_backward(net, gather_rows(ds.features, idx), labels);
            } catch (const NonFiniteActivation&) {
                throw TrainingDiverged(epoch);
            }
            if (!std::isfinite(lg.loss))
                throw TrainingDiverged(epoch);
            loss_sum += lg.loss * static_cast<double>(idx.size());
            const Gradients clipped = clip_gradients(std::move(lg.grads), cfg.grad_clip);
            adamw_step(net, clipped, state, lr_at(step, total, warmup, cfg.base_lr), cfg);
            ++step;
        }
        m.train_loss = loss_sum / static_cast<double>(n_train);
        m.train_acc = accuracy(net, ds, ds.split.train_idx);
        m.val_acc = accuracy(net, ds, ds.split.val_idx);
        report.per_epoch.push_back(m);
    }
    report.final_alphas = net.alphas;
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------

std::vector<SweepPoint> run_sweep(const SweepSettings& s, const TrainConfig& cfg) {
    if (s.seeds < 1 || s.epsilons.empty())
        throw std::invalid_argument("sweep: need at least one epsilon and one seed");
    const Dataset ds = gen_spirals(s.samples, s.turns, s.noise, s.data_seed);
    std::vector<int> dims = {static_cast<int>(ds.dims())};
    dims.insert(dims.end(), s.hidden.begin(), s.hidden.end());
    dims.push_back(ds.classes);

    const std::size_t jobs = s.epsilons.size() * static_cast<std::size_t>(s.seeds);
    std::vector<double> acc(jobs, 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            try {
                const double eps = s.epsilons[j / static_cast<std::size_t>(s.seeds)];
                TrainConfig run_cfg = cfg;
                run_cfg.seed = cfg.seed + j % static_cast<std::size_t>(s.seeds);
                DenseNet net = init_net(dims, act::BerLU{{s.alpha, eps}}, run_cfg.seed);
                acc[j] = train(net, ds, run_cfg).per_epoch.back().val_acc;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    unsigned workers = s.threads ? s.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(work);
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<SweepPoint> out;
    for (std::size_t e = 0; e < s.epsilons.size(); ++e) {
        SweepPoint p;
        p.epsilon = s.epsilons[e];
        p.accs.assign(acc.begin() + static_cast<std::ptrdiff_t>(e * s.seeds),
                      acc.begin() + static_cast<std::ptrdiff_t>((e + 1) * s.seeds));
        p.mean_acc = std::accumulate(p.accs.begin(), p.accs.end(), 0.0) / static_cast<double>(s.seeds);
        double ss = 0.0;
        for (double a : p.accs)
            ss += (a - p.mean_acc) * (a - p.mean_acc);
        p.std_acc = s.seeds > 1 ? std::sqrt(ss / (s.seeds - 1)) : 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace berlu
