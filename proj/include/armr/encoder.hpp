#pragma once

#include <span>

#include "armr/autodiff.hpp"
#include "armr/ptl.hpp"
#include "armr/records.hpp"

namespace armr {

/// Sum of the table rows selected by `codes` (1 x dim); the empty set gives zeros.
Var embed_visit(Var table, const CodeSet& codes);

/// Diagnosis and procedure histories -> 4N x dim patient representation
/// (rows 0..2N-1 from the diagnosis encoder, 2N..4N-1 from procedures).
class PatientEncoder {
 public:
  static PatientEncoder create(ParameterStore& store, const Vocab& vocab, TemporalMode mode,
                               int dim, int split_n, int state_size, Rng& rng);

  /// Both sequences are chronological (visit 1 first) and include the current visit.
  Var operator()(Graph& g, std::span<const CodeSet> diagnoses,
                 std::span<const CodeSet> procedures) const;

  const Parameter& diag_embedding() const { return *diag_embedding_; }
  const Parameter& proc_embedding() const { return *proc_embedding_; }
  const TemporalEncoder& ptl_d() const { return ptl_d_; }
  const TemporalEncoder& ptl_p() const { return ptl_p_; }

 private:
  Parameter* diag_embedding_ = nullptr;
  Parameter* proc_embedding_ = nullptr;
  TemporalEncoder ptl_d_;
  TemporalEncoder ptl_p_;
};

}  // namespace armr
