#include "touchgen/text/condition.hpp"

#include "touchgen/core/errors.hpp"

namespace touchgen::text {

template <class T>
void ConditionBundle<T>::validate() const {
    if (!c_obj.defined() || !null_embedding.defined()) throw ConfigError("condition bundle is incomplete");
    const auto d = c_obj.cols();
    if (null_embedding.rows() != 1 || null_embedding.cols() != d)
        throw ShapeError("null embedding must be 1 x " + std::to_string(d));
    if (c_sen && c_sen->cols() != d) throw ShapeError("c_sen and c_obj widths differ");
    if (!c_obj.value().allFinite() || !null_embedding.value().allFinite() || (c_sen && !c_sen->value().allFinite()))
        throw ConfigError("condition bundle contains non-finite values");
}

template <class T>
ConditionValues<T> detach(const ConditionBundle<T>& bundle) {
    ConditionValues<T> v{bundle.c_obj.value(), std::nullopt, bundle.null_embedding.value(), bundle.theta_t,
                         bundle.gel_id};
    if (bundle.c_sen) v.c_sen = bundle.c_sen->value();
    return v;
}

template <class T>
ConditionBundle<T> attach(Tape<T>& tape, const ConditionValues<T>& values) {
    ConditionBundle<T> b{tape.constant(values.c_obj), std::nullopt, tape.constant(values.null_embedding),
                         values.theta_t, values.gel_id};
    if (values.c_sen) b.c_sen = tape.constant(*values.c_sen);
    return b;
}

template <class T>
FusedCondition<T> fuse_conditions(const ConditionBundle<T>& bundle, int t, int timesteps, bool time_adaptive) {
    if (t < 0 || t > timesteps)
        throw ConfigError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps) + "]");
    if (!bundle.c_sen || (time_adaptive && t < bundle.theta_t)) return {bundle.c_obj, 0, false};
    const Var<T> parts[] = {*bundle.c_sen, bundle.c_obj};
    return {ag::concat_rows<T>(parts), static_cast<int>(bundle.c_sen->rows()), false};
}

template <class T>
FusedCondition<T> null_condition(const ConditionBundle<T>& bundle) {
    return {bundle.null_embedding, 0, true};
}

template <class T>
Conditioner<T>::Conditioner(const ConditionerConfig& config, Rng& rng)
    : config_(config),
      encoder_(config.encoder, rng),
      prompts_(config.gel_count, config.prompt_length, config.encoder.dim, rng),
      null_(nn::normal_matrix<T>(1, config.encoder.dim, 1.0, rng)) {
    if (config.theta_t < 0) throw ConfigError("theta_t must be non-negative");
}

template <class T>
ConditionBundle<T> Conditioner<T>::bundle(Tape<T>& tape, const TokenSequence& tokens, int gel_id) {
    ConditionBundle<T> b{encoder_(tape, tokens), std::nullopt, tape.param(null_), config_.theta_t, gel_id};
    if (gel_id >= 0) b.c_sen = prompts_(tape, gel_id);
    return b;
}

template <class T>
void Conditioner<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    encoder_.collect(prefix + ".encoder", out);
    prompts_.collect(prefix + ".gel_prompts", out);
    out.push_back({prefix + ".null", &null_});
}

#define TOUCHGEN_TEXT_INSTANTIATE(T)                                                                   \
    template struct ConditionBundle<T>;                                                                \
    template ConditionValues<T> detach(const ConditionBundle<T>&);                                     \
    template ConditionBundle<T> attach(Tape<T>&, const ConditionValues<T>&);                           \
    template FusedCondition<T> fuse_conditions(const ConditionBundle<T>&, int, int, bool);             \
    template FusedCondition<T> null_condition(const ConditionBundle<T>&);                              \
    template class Conditioner<T>;

TOUCHGEN_TEXT_INSTANTIATE(float)
TOUCHGEN_TEXT_INSTANTIATE(double)

#undef TOUCHGEN_TEXT_INSTANTIATE

}  // namespace touchgen::text
