#include "armr/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "armr/rng.hpp"

namespace armr {

void GeneratorConfig::validate() const {
  if (num_patients < 1) throw std::invalid_argument("num_patients must be >= 1");
  if (!(mean_visits >= 1.0)) throw std::invalid_argument("mean_visits must be >= 1");
  if (max_visits < 1) throw std::invalid_argument("max_visits must be >= 1");
  if (vocab.num_diagnoses < 1 || vocab.num_procedures < 1 || vocab.num_medications < 1)
    throw std::invalid_argument("vocabulary sizes must be >= 1");
  if (!(target_new_drug_ratio >= 0.0 && target_new_drug_ratio < 1.0))
    throw std::invalid_argument("target_new_drug_ratio must lie in [0, 1)");
  if (!(similarity_decay_rate >= 0.0))
    throw std::invalid_argument("similarity_decay_rate must be >= 0");
  if (!(mean_gap_days > 0.0)) throw std::invalid_argument("mean_gap_days must be > 0");
  if (num_clusters < 1) throw std::invalid_argument("num_clusters must be >= 1");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"num_patients", num_patients},
          {"mean_visits", mean_visits},
          {"max_visits", max_visits},
          {"vocab", vocab_to_json(vocab)},
          {"target_new_drug_ratio", target_new_drug_ratio},
          {"similarity_decay_rate", similarity_decay_rate},
          {"mean_gap_days", mean_gap_days},
          {"num_clusters", num_clusters},
          {"seed", seed}};
}

namespace {

struct Cluster {
  std::vector<int> diagnoses;
  std::vector<int> procedures;
  std::vector<int> drugs;
};

std::vector<int> distinct_sample(Rng& rng, int universe, int count) {
  count = std::min(count, universe);
  std::set<int> picked;
  while (static_cast<int>(picked.size()) < count)
    picked.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(universe))));
  std::vector<int> out(picked.begin(), picked.end());
  rng.shuffle(out);
  return out;
}

std::vector<Cluster> make_clusters(const GeneratorConfig& c) {
  Rng rng = Rng::stream(c.seed, "clusters");
  std::vector<Cluster> out;
  for (int k = 0; k < c.num_clusters; ++k) {
    Cluster cl;
    cl.diagnoses = distinct_sample(rng, c.vocab.num_diagnoses, 10);
    cl.procedures = distinct_sample(rng, c.vocab.num_procedures, 4);
    cl.drugs = distinct_sample(rng, c.vocab.num_medications, 8);
    out.push_back(std::move(cl));
  }
  return out;
}

// Chooses how many new drugs to add next to `old_count` reused ones so that
// E[n / (old + n)] equals `ratio`, mixing the two neighbouring integers.
int new_drug_count(Rng& rng, int old_count, double ratio) {
  if (old_count == 0) return 1;
  if (ratio <= 0.0) return 0;
  const double x = ratio * old_count / (1.0 - ratio);
  const int lo = static_cast<int>(std::floor(x));
  const double f_lo = static_cast<double>(lo) / (old_count + lo);
  const double f_hi = static_cast<double>(lo + 1) / (old_count + lo + 1);
  const double q = std::clamp((ratio - f_lo) / (f_hi - f_lo), 0.0, 1.0);
  return rng.bernoulli(q) ? lo + 1 : lo;
}

class PatientSimulator {
 public:
  PatientSimulator(const GeneratorConfig& c, const std::vector<Cluster>& clusters, double ratio,
                   std::uint64_t index)
      : c_(c), clusters_(clusters), ratio_(ratio),
        rng_(Rng::stream(c.seed, "patient", index)),
        seen_drugs_(static_cast<std::size_t>(c.vocab.num_medications), false),
        ever_active_(clusters.size(), false), regimen_(clusters.size()) {}

  PatientRecord run(std::string id) {
    PatientRecord r;
    r.patient_id = std::move(id);
    const int visits =
        std::min(c_.max_visits, 1 + rng_.geometric(1.0 / std::max(1.0, c_.mean_visits)));
    std::int64_t day = static_cast<std::int64_t>(rng_.below(365));
    const int initial = 1 + rng_.poisson(1.0);
    for (int k = 0; k < initial; ++k) activate(random_fresh_cluster());

    for (int t = 0; t < visits; ++t) {
      std::set<int> meds;
      if (t == 0) {
        for (int k : active_)
          for (int d : regimen_[k])
            if (rng_.bernoulli(0.9)) meds.insert(d);
        if (meds.empty()) meds.insert(regimen_[active_.front()].front());
      } else {
        const auto gap = 1 + static_cast<std::int64_t>(std::llround(rng_.exponential(c_.mean_gap_days)));
        day += gap;
        meds = follow_up(static_cast<double>(gap));
      }
      Visit v;
      v.admit_day = day;
      v.diagnoses = draw_codes(true);
      v.procedures = draw_codes(false);
      v.medications.assign(meds.begin(), meds.end());
      for (int d : v.medications) seen_drugs_[static_cast<std::size_t>(d)] = true;
      previous_ = v.medications;
      r.visits.push_back(std::move(v));
    }
    return r;
  }

 private:
  std::set<int> follow_up(double gap) {
    const double survival = std::exp(-c_.similarity_decay_rate * gap);
    std::vector<int> still;
    for (int k : active_)
      if (rng_.bernoulli(survival)) still.push_back(k);
    // Resolved conditions occasionally recur.
    for (std::size_t k = 0; k < clusters_.size(); ++k)
      if (ever_active_[k] && std::find(still.begin(), still.end(), static_cast<int>(k)) == still.end() &&
          rng_.bernoulli(0.03))
        still.push_back(static_cast<int>(k));
    active_ = still;

    std::set<int> meds;
    std::set<int> active_drugs;
    for (int k : active_)
      for (int d : regimen_[k]) active_drugs.insert(d);
    for (int d : previous_) {
      const double keep = active_drugs.count(d) ? 0.95 : 0.15 * survival;
      if (rng_.bernoulli(keep)) meds.insert(d);
    }
    for (int d : active_drugs)
      if (seen_drugs_[static_cast<std::size_t>(d)] && !meds.count(d) && rng_.bernoulli(0.5))
        meds.insert(d);

    int wanted = new_drug_count(rng_, static_cast<int>(meds.size()), ratio_);
    for (int attempt = 0; wanted > 0 && attempt < 8; ++attempt) {
      const int k = random_fresh_cluster();
      if (k < 0) break;
      activate(k);
      for (int d : regimen_[k])
        if (wanted > 0 && !seen_drugs_[static_cast<std::size_t>(d)] && !meds.count(d)) {
          meds.insert(d);
          --wanted;
        }
    }
    if (meds.empty()) meds.insert(previous_.front());
    return meds;
  }

  CodeSet draw_codes(bool diagnoses) {
    std::set<int> out;
    for (int k : active_) {
      const auto& pool = diagnoses ? clusters_[k].diagnoses : clusters_[k].procedures;
      const int take = diagnoses ? 3 + static_cast<int>(rng_.below(3))
                                 : 1 + static_cast<int>(rng_.below(2));
      std::vector<int> shuffled = pool;
      rng_.shuffle(shuffled);
      for (int i = 0; i < take && i < static_cast<int>(shuffled.size()); ++i)
        out.insert(shuffled[i]);
    }
    const int universe = diagnoses ? c_.vocab.num_diagnoses : c_.vocab.num_procedures;
    const int noise = rng_.poisson(diagnoses ? 1.0 : 0.5);
    for (int i = 0; i < noise; ++i)
      out.insert(static_cast<int>(rng_.below(static_cast<std::uint64_t>(universe))));
    return CodeSet(out.begin(), out.end());
  }

  int random_fresh_cluster() {
    std::vector<int> fresh;
    for (std::size_t k = 0; k < clusters_.size(); ++k)
      if (!ever_active_[k]) fresh.push_back(static_cast<int>(k));
    if (fresh.empty()) return -1;
    return fresh[rng_.below(fresh.size())];
  }

  // First activation fixes this patient's regimen for the cluster: a few
  // drugs out of the cluster's interchangeable pool.
  void activate(int k) {
    if (k < 0) return;
    if (!ever_active_[static_cast<std::size_t>(k)]) {
      std::vector<int> pool = clusters_[k].drugs;
      rng_.shuffle(pool);
      pool.resize(std::min<std::size_t>(pool.size(), 2 + rng_.below(2)));
      regimen_[static_cast<std::size_t>(k)] = std::move(pool);
    }
    ever_active_[static_cast<std::size_t>(k)] = true;
    if (std::find(active_.begin(), active_.end(), k) == active_.end()) active_.push_back(k);
  }

  const GeneratorConfig& c_;
  const std::vector<Cluster>& clusters_;
  double ratio_;
  Rng rng_;
  std::vector<bool> seen_drugs_;
  std::vector<bool> ever_active_;
  std::vector<std::vector<int>> regimen_;
  std::vector<int> active_;
  CodeSet previous_;
};

}  // namespace

namespace {

double follow_up_new_share(const std::vector<PatientRecord>& records) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& r : records) {
    std::vector<bool> seen;
    for (std::size_t i = 0; i < r.visits.size(); ++i) {
      const auto& meds = r.visits[i].medications;
      int fresh = 0;
      for (int d : meds) {
        if (static_cast<std::size_t>(d) >= seen.size()) seen.resize(static_cast<std::size_t>(d) + 1, false);
        if (!seen[static_cast<std::size_t>(d)]) ++fresh;
      }
      if (i > 0 && !meds.empty()) {
        sum += static_cast<double>(fresh) / static_cast<double>(meds.size());
        ++n;
      }
      for (int d : meds) seen[static_cast<std::size_t>(d)] = true;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<PatientRecord> simulate(const GeneratorConfig& config,
                                    const std::vector<Cluster>& clusters, double ratio,
                                    std::uint64_t seed, int patients) {
  GeneratorConfig c = config;
  c.seed = seed;
  std::vector<PatientRecord> out;
  out.reserve(static_cast<std::size_t>(patients));
  const int width = static_cast<int>(std::to_string(patients).size());
  for (int p = 0; p < patients; ++p) {
    std::string id = std::to_string(p);
    id = "P" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    PatientSimulator sim(c, clusters, ratio, static_cast<std::uint64_t>(p));
    out.push_back(sim.run(std::move(id)));
  }
  return out;
}

// Follow-up visits that reuse nothing are all-new whatever the target, so the
// per-visit target is tuned on a fixed-size pilot cohort until the realised
// follow-up mean matches. The pilot depends on the seed only.
double calibrated_ratio(const GeneratorConfig& config, const std::vector<Cluster>& clusters) {
  constexpr int kPilotPatients = 2000;
  const std::uint64_t pilot_seed = Rng::stream(config.seed, "calibration").next();
  const double target = config.target_new_drug_ratio;
  double ratio = target;
  for (int iter = 0; iter < 4; ++iter) {
    const double got = follow_up_new_share(simulate(config, clusters, ratio, pilot_seed, kPilotPatients));
    ratio = std::clamp(ratio + (target - got), 0.0, 0.95);
  }
  return ratio;
}

}  // namespace

std::vector<PatientRecord> generate_cohort(const GeneratorConfig& config) {
  config.validate();
  const auto clusters = make_clusters(config);
  auto out = simulate(config, clusters, calibrated_ratio(config, clusters), config.seed,
                      config.num_patients);
  for (const auto& r : out) validate_record(r, config.vocab);
  return out;
}

DatasetSplit split_dataset(const std::vector<PatientRecord>& records,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  const auto n = records.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[0]));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
    throw std::invalid_argument("split of " + std::to_string(n) +
                                " patients leaves an empty partition");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(order);
  DatasetSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    const PatientRecord& r = records[order[i]];
    if (i < n_train) s.train.push_back(r);
    else if (i < n_train + n_val) s.validation.push_back(r);
    else s.test.push_back(r);
  }
  return s;
}

}  // namespace armr
