// Serial vs OpenMP comparison for the data-parallel kernels: co-occurrence
// stats collection, the omission experiment, and the simulation cell sweep.
// Each kernel is checked for output equality between the two paths before
// the timings are reported.

#include <chrono>
#include <cstdio>
#include <string>

#include "cas/extraction.hpp"
#include "cas/harness.hpp"
#include "cas/parallel.hpp"

using namespace cas;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

template <typename F>
double timed(F&& fn) {
  auto start = std::chrono::steady_clock::now();
  fn();
  return seconds_since(start);
}

void report(const char* name, double serial, double par, bool equal) {
  std::printf("%-22s serial %7.3fs  parallel %7.3fs  speedup %5.2fx  equal: %s\n",
              name, serial, par, par > 0 ? serial / par : 0.0, equal ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t sessions = argc > 1 ? std::stoul(argv[1]) : 3000;
  parallel::set_threads(0);
  std::printf("kernel benchmark over %zu synthetic sessions (threads: %d)\n\n",
              sessions, parallel::threads());

  // ---- stats collection ----
  SynthParams params = default_synth_params();
  params.n_sessions = sessions;
  params.emit_outcome_events = true;
  params.include_booking = true;
  params.k_weights = {0.0, 0.0, 0.0, 1.0};
  Corpus corpus = synth_corpus(params, 1);
  Ontology ontology = synth_ontology(params);

  CooccurrenceStats serial_stats, par_stats;
  parallel::set_threads(1);
  double t_serial = timed([&] { serial_stats = collect_stats(corpus, ontology, 3); });
  parallel::set_threads(0);
  double t_par = timed([&] { par_stats = collect_stats(corpus, ontology, 3); });
  bool stats_equal = serial_stats.counts.size() == par_stats.counts.size();
  if (stats_equal) {
    for (const auto& [key, ps] : serial_stats.counts) {
      auto it = par_stats.counts.find(key);
      if (it == par_stats.counts.end() || it->second.n_s != ps.n_s ||
          it->second.n_sv != ps.n_sv) {
        stats_equal = false;
        break;
      }
    }
  }
  report("collect_stats", t_serial, t_par, stats_equal);

  // ---- omission experiment ----
  ExperimentConfig cfg;
  cfg.use_synth = true;
  cfg.synth = default_synth_params();
  cfg.synth.n_sessions = sessions / 3;
  cfg.synth.forbidden_session_rate = 0.2;
  cfg.seed = 2;

  OmissionReport om_serial, om_par;
  parallel::set_threads(1);
  t_serial = timed(
      [&] { om_serial = run_omission_experiment(cfg, {0.0, 0.1, 0.2, 0.3}); });
  parallel::set_threads(0);
  t_par = timed([&] { om_par = run_omission_experiment(cfg, {0.0, 0.1, 0.2, 0.3}); });
  report("omission_experiment", t_serial, t_par,
         omission_to_csv(om_serial) == omission_to_csv(om_par));

  // ---- simulation cell sweep ----
  ExperimentConfig sim = cfg;
  sim.synth.forbidden_session_rate = 0.0;
  sim.coverage_levels = {1.0, 0.75, 0.5, 0.25};

  Metrics m_serial, m_par;
  parallel::set_threads(1);
  t_serial = timed([&] { m_serial = run_simulation(sim); });
  parallel::set_threads(0);
  t_par = timed([&] { m_par = run_simulation(sim); });
  report("simulation_cells", t_serial, t_par,
         metrics_to_csv(m_serial) == metrics_to_csv(m_par));

  return 0;
}
