#include "armr/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace armr {

Var embed_visit(Var table, const CodeSet& codes) {
  const std::vector<CodeSet> one{codes};
  return embedding_bag(table, one);
}

PatientEncoder PatientEncoder::create(ParameterStore& store, const Vocab& vocab, TemporalMode mode,
                                      int dim, int split_n, int state_size, Rng& rng) {
  PatientEncoder e;
  const double bound = 1.0 / std::sqrt(dim);
  e.diag_embedding_ =
      &store.add("encoder.diag_embedding", uniform_matrix(vocab.num_diagnoses, dim, bound, rng));
  e.proc_embedding_ =
      &store.add("encoder.proc_embedding", uniform_matrix(vocab.num_procedures, dim, bound, rng));
  e.ptl_d_ = TemporalEncoder::create(store, "encoder.ptl_d", mode, dim, split_n, state_size, rng);
  e.ptl_p_ = TemporalEncoder::create(store, "encoder.ptl_p", mode, dim, split_n, state_size, rng);
  return e;
}

Var PatientEncoder::operator()(Graph& g, std::span<const CodeSet> diagnoses,
                               std::span<const CodeSet> procedures) const {
  if (diagnoses.size() != procedures.size())
    throw std::invalid_argument("encode_patient: " + std::to_string(diagnoses.size()) +
                                " diagnosis sets vs " + std::to_string(procedures.size()) +
                                " procedure sets");
  const std::vector<CodeSet> diag_recent(diagnoses.rbegin(), diagnoses.rend());
  const std::vector<CodeSet> proc_recent(procedures.rbegin(), procedures.rend());
  Var d_h = ptl_d_(g, embedding_bag(g.param(*diag_embedding_), diag_recent));
  Var p_h = ptl_p_(g, embedding_bag(g.param(*proc_embedding_), proc_recent));
  return concat_rows({d_h, p_h});
}

}  // namespace armr
