#include <berlu/report_io.hpp>

#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace berlu {

Json to_json(const ActivationSpec& spec) {
    Json j;
    j["name"] = spec.name();
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, act::BerLU>) {
                j["alpha"] = a.params.alpha;
                j["epsilon"] = a.params.epsilon;
            } else if constexpr (std::is_same_v<T, act::LeakyReLU> || std::is_same_v<T, act::PReLU>) {
                j["alpha"] = a.alpha;
            } else if constexpr (std::is_same_v<T, act::ELU> || std::is_same_v<T, act::CELU>) {
                j["scale"] = a.scale;
            }
        },
        spec.kind());
    return j;
}

ActivationSpec activation_from_json(const Json& j) {
    ActivationOptions o;
    o.alpha = j.value("alpha", o.alpha);
    o.epsilon = j.value("epsilon", o.epsilon);
    o.scale = j.value("scale", o.scale);
    return activation_from_name(j.at("name").get<std::string>(), o);
}

Json to_json(const LipschitzReport& r) {
    Json j;
    j["spec"] = to_json(r.spec);
    j["estimate"] = r.estimate;
    j["exact"] = r.exact ? Json(*r.exact) : Json(nullptr);
    j["argmax_x"] = r.argmax_x;
    j["grid"] = {{"lo", r.grid.lo},
                 {"hi", r.grid.hi},
                 {"coarse_points", r.grid.coarse_points},
                 {"refine_iters", r.grid.refine_iters}};
    j["expansive_slope"] = r.expansive_slope;
    return j;
}

Json to_json(const GradCheckReport& r) {
    Json j;
    j["spec"] = to_json(r.spec);
    j["max_rel_error"] = r.max_rel_error;
    j["worst_x"] = r.worst_x;
    j["step"] = r.step;
    j["points"] = r.points;
    return j;
}

Json to_json(const CorrelationTrace& t) {
    Json j;
    j["spec"] = to_json(t.spec);
    j["depth"] = t.depth;
    j["width"] = t.width;
    j["trials"] = t.trials;
    j["c0"] = t.c0;
    j["seed"] = t.seed;
    j["init"] = {{"weight_var", t.init.weight_var}, {"bias_var", t.init.bias_var}, {"target_q", t.target_q}};
    j["one_minus_c"] = t.one_minus_c;
    return j;
}

Json to_json(const DecayFit& f) {
    Json j;
    j["exponent"] = f.exponent;
    j["coefficient"] = f.coefficient;
    j["fit_range"] = {f.first_layer, f.last_layer};
    j["r_squared"] = f.r_squared;
    return j;
}

Json to_json(const BernsteinTransition& t) {
    Json j;
    j["center"] = t.center;
    j["epsilon"] = t.epsilon;
    j["degree"] = t.degree;
    j["control_points"] = t.control_points;
    return j;
}

Json to_json(const BenchResult& r) {
    Json j;
    j["activation"] = r.spec.name();
    j["buffer_len"] = r.buffer_len;
    j["forward_ns_per_elem"] = r.forward_ns_per_elem;
    j["backward_ns_per_elem"] = r.backward_ns_per_elem;
    j["reps"] = r.reps;
    j["bytes_touched"] = r.bytes_touched;
    j["checksum"] = r.checksum;
    j["forward_rep_ns"] = r.forward_rep_ns;
    j["backward_rep_ns"] = r.backward_rep_ns;
    return j;
}

Json to_json(const SweepPoint& p) {
    return Json{{"epsilon", p.epsilon}, {"mean_acc", p.mean_acc}, {"std_acc", p.std_acc}, {"accs", p.accs}};
}

Json to_json(const TrainConfig& c) {
    Json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["base_lr"] = c.base_lr;
    j["weight_decay"] = c.weight_decay;
    j["warmup_epochs"] = c.warmup_epochs;
    j["grad_clip"] = c.grad_clip;
    j["seed"] = c.seed;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    return j;
}

TrainConfig train_config_from_json(const Json& j) {
    static const std::set<std::string> known = {"epochs",       "batch_size", "base_lr", "weight_decay",
                                                "warmup_epochs", "grad_clip", "seed",    "adam_beta1",
                                                "adam_beta2",    "adam_eps"};
    if (!j.is_object())
        throw std::invalid_argument("train config: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key))
            throw std::invalid_argument("train config: unknown key '" + key + "'");
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.value("seed", c.seed);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config " + path);
    return train_config_from_json(Json::parse(in));
}

Json to_json(const RunReport& r, bool include_timing) {
    Json j;
    Json epochs = Json::array();
    for (std::size_t e = 0; e < r.per_epoch.size(); ++e) {
        const auto& m = r.per_epoch[e];
        epochs.push_back({{"epoch", e + 1},
                          {"train_loss", m.train_loss},
                          {"train_acc", m.train_acc},
                          {"val_acc", m.val_acc},
                          {"lr", m.lr}});
    }
    j["per_epoch"] = std::move(epochs);
    j["final_alphas"] = r.final_alphas;
    if (include_timing)
        j["wall_time_s"] = r.wall_time_s;
    return j;
}

void write_metrics_csv(std::ostream& os, const RunReport& r) {
    os << "epoch,train_loss,train_acc,val_acc,lr\n";
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t e = 0; e < r.per_epoch.size(); ++e) {
        const auto& m = r.per_epoch[e];
        os << e + 1 << ',' << m.train_loss << ',' << m.train_acc << ',' << m.val_acc << ',' << m.lr << '\n';
    }
    os.precision(old);
}

}  // namespace berlu
