#include "rqlab/suite.hpp"

#include "rqlab/ipm.hpp"

namespace rqlab {

SuiteReport run_suite(const SuiteOptions& opts) {
  using nlohmann::json;
  SuiteReport report;
  json jobs = json::array();
  long dominance_checks = 0;

  for (int k = 0; k < opts.instances; ++k) {
    RandomInstanceSpec spec = opts.random;
    spec.seed = suite_instance_seed(opts.seed, k);
    for (int n : opts.frame_stacks) {
      json job;
      job["instance"] = k;
      job["instance_seed"] = spec.seed;
      job["frame_stack"] = n;
      try {
        const Pomdp p = generate_instance(spec);
        job["sizes"] = {p.n_states, p.n_obs, p.n_actions};
        const AgentStateMachine m = frame_stack(n, p);
        const StationaryModel sm = analyze(p, m, uniform_policy(m.n_z, p.n_actions));
        job["a2"] = sm.unique && sm.positivity_ok;
        if (!sm.positivity_ok) job["note"] = "A2 violated: analysis restricted to the recurrent support";
        const QTable q = solve_q_xi(sm, p.discount);
        CertificationContext ctx = make_certification_context(p, m, sm, q, opts.certify);
        const Vector v = q.greedy_value();

        json certs = json::object();
        for (const std::string& kind_name : opts.ipms) {
          const IpmKind kind = parse_ipm_kind(kind_name);
          const IpmSpec ipm = kind == IpmKind::TotalVariation ? IpmSpec::total_variation(m.n_z)
                                                              : IpmSpec::wasserstein(m.metric_or_discrete());
          const BoundCertificate cert = certify(ctx, ipm);
          ++report.certificates;
          if (!cert.all_certified()) ++report.failures;

          json c = to_json(cert, false);
          // Dominance of the instance-independent bound over the exact functional.
          ++dominance_checks;
          bool dominated = true;
          if (cert.rho_bound.applicable) dominated = cert.rho_value <= cert.rho_bound.value + 1e-9;
          if (!dominated) ++report.failures;
          c["rho_dominated"] = dominated;
          certs[to_string(kind)] = c;
        }
        job["span_v_xi"] = span(v);
        job["certificates"] = certs;
      } catch (const std::exception& e) {
        job["error"] = e.what();
        ++report.failures;
      }
      jobs.push_back(job);
    }
  }
  report.json["jobs"] = jobs;
  report.json["summary"] = {{"instances", opts.instances},
                            {"certificates", report.certificates},
                            {"dominance_checks", dominance_checks},
                            {"failures", report.failures},
                            {"pass", report.pass()}};
  report.json["settings"] = {{"seed", opts.seed},
                             {"frame_stacks", opts.frame_stacks},
                             {"ipms", opts.ipms},
                             {"t_cert", opts.certify.t_cert},
                             {"t_dp", opts.certify.t_dp},
                             {"discount", opts.random.discount}};
  return report;
}

}  // namespace rqlab
