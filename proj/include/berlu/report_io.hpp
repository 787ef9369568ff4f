#pragma once

#include <berlu/activations.hpp>
#include <berlu/analysis.hpp>
#include <berlu/bench.hpp>
#include <berlu/bernstein.hpp>
#include <berlu/trainer.hpp>

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace berlu {

using Json = nlohmann::ordered_json;

Json to_json(const ActivationSpec& spec);
ActivationSpec activation_from_json(const Json& j);

Json to_json(const LipschitzReport& r);
Json to_json(const GradCheckReport& r);
Json to_json(const CorrelationTrace& t);
Json to_json(const DecayFit& f);
Json to_json(const BernsteinTransition& t);
Json to_json(const BenchResult& r);
Json to_json(const SweepPoint& p);

Json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are an error.
TrainConfig train_config_from_json(const Json& j);
TrainConfig load_train_config(const std::string& path);

/// `wall_time_s` is written only when `include_timing` is set, so that
/// repeated runs produce byte-identical documents.
Json to_json(const RunReport& r, bool include_timing = false);

/// Header `epoch,train_loss,train_acc,val_acc,lr`.
void write_metrics_csv(std::ostream& os, const RunReport& r);

}  // namespace berlu
