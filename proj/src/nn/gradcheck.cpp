#include "evotraj/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evotraj/errors.hpp"

namespace evotraj::nn {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed() ? "pass" : "FAIL") << ": " << checked << " checked, " << failed << " failed, "
     << skipped << " skipped at kinks";
  if (checked > 0)
    os << "; worst " << worst.parameter << "[" << worst.index << "] analytic=" << worst.analytic
       << " numeric=" << worst.numeric << " rel=" << worst.error;
  return os.str();
}

GradCheckReport gradient_check(const GradCheckTarget& target, const GradCheckOptions& options) {
  std::size_t total = 0;
  for (const Parameter* p : target.parameters) total += p->value.size();
  if (total > options.max_parameters)
    throw ConfigError("gradient_check: fragment has " + std::to_string(total) + " parameters, limit " +
                      std::to_string(options.max_parameters));

  target.loss();
  const std::uint64_t base_pattern = target.activation_pattern ? target.activation_pattern() : 0;
  target.backward();

  GradCheckReport report;
  double worst_score = -1.0;
  for (Parameter* p : target.parameters) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float original = p->value[i];
      const float plus = original + static_cast<float>(options.step);
      const float minus = original - static_cast<float>(options.step);

      p->value[i] = plus;
      const double loss_plus = target.loss();
      const bool kink_plus = target.activation_pattern && target.activation_pattern() != base_pattern;
      p->value[i] = minus;
      const double loss_minus = target.loss();
      const bool kink_minus = target.activation_pattern && target.activation_pattern() != base_pattern;
      p->value[i] = original;

      GradCheckEntry e;
      e.parameter = p->name;
      e.index = i;
      e.analytic = analytic[i];
      e.numeric = (loss_plus - loss_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double diff = std::abs(e.analytic - e.numeric);
      const double scale = std::max(std::abs(e.analytic), std::abs(e.numeric));
      e.error = scale > 0.0 ? diff / scale : 0.0;
      e.skipped = kink_plus || kink_minus;
      e.passed = e.skipped || diff <= options.relative_tolerance * scale ||
                 diff <= options.absolute_tolerance;

      if (e.skipped) {
        ++report.skipped;
      } else {
        ++report.checked;
        if (!e.passed) ++report.failed;
        // Rank offenders by how far they exceed the allowed band.
        const double allowed = std::max(options.relative_tolerance * scale, options.absolute_tolerance);
        const double score = diff / allowed;
        if (score > worst_score) {
          worst_score = score;
          report.worst = e;
        }
      }
      report.entries.push_back(std::move(e));
    }
  }
  // Leave the fragment's caches consistent with the unperturbed parameters.
  target.loss();
  return report;
}

}  // namespace evotraj::nn
