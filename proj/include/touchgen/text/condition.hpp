#pragma once

#include <optional>
#include <string>

#include "touchgen/text/encoder.hpp"

namespace touchgen::text {

// Per-sample conditioning inputs living on a tape.
template <class T>
struct ConditionBundle {
    Var<T> c_obj;                  // l x d_c, l may be 0
    std::optional<Var<T>> c_sen;   // n_gs x d_c
    Var<T> null_embedding;         // 1 x d_c
    int theta_t = 600;
    int gel_id = -1;

    // Throws ShapeError/ConfigError on mismatched widths or non-finite rows.
    void validate() const;
};

// Detached copy of a bundle, reusable across per-step tapes during sampling.
template <class T>
struct ConditionValues {
    Matrix<T> c_obj;
    std::optional<Matrix<T>> c_sen;
    Matrix<T> null_embedding;
    int theta_t = 600;
    int gel_id = -1;
};

template <class T>
ConditionValues<T> detach(const ConditionBundle<T>& bundle);
template <class T>
ConditionBundle<T> attach(Tape<T>& tape, const ConditionValues<T>& values);

// Condition sequence handed to the backbone. The first sen_rows rows are gel
// prompt rows; blocks outside the gel-prompt layers drop them.
template <class T>
struct FusedCondition {
    Var<T> rows;
    int sen_rows = 0;
    bool is_null = false;
};

// [c_sen; c_obj] when t >= theta_t (or when gating is off), c_obj otherwise.
// t must lie in [0, timesteps].
template <class T>
FusedCondition<T> fuse_conditions(const ConditionBundle<T>& bundle, int t, int timesteps, bool time_adaptive = true);

// The CFG unconditional branch: the learned null row alone.
template <class T>
FusedCondition<T> null_condition(const ConditionBundle<T>& bundle);

struct ConditionerConfig {
    TextEncoderConfig encoder;
    int gel_count = 3;
    int prompt_length = 4;  // n_gs
    int theta_t = 600;
};

// Owns every conditioning parameter: text encoder, gel prompt bank, null row.
template <class T>
class Conditioner {
public:
    Conditioner(const ConditionerConfig& config, Rng& rng);

    // gel_id < 0 leaves c_sen absent.
    ConditionBundle<T> bundle(Tape<T>& tape, const TokenSequence& tokens, int gel_id);

    const ConditionerConfig& config() const { return config_; }
    int dim() const { return config_.encoder.dim; }
    TextEncoder<T>& encoder() { return encoder_; }
    GelPromptBank<T>& prompts() { return prompts_; }
    void collect(const std::string& prefix, ParameterList<T>& out);

private:
    ConditionerConfig config_;
    TextEncoder<T> encoder_;
    GelPromptBank<T> prompts_;
    Parameter<T> null_;
};

}  // namespace touchgen::text
