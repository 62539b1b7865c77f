#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "diabrisk/rng.hpp"

namespace diabrisk::testing {

namespace {

int bern(Rng& rng, double p) { return uniform01(rng) < p ? 1 : 0; }

int clamp_int(double v, int lo, int hi) { return std::clamp(static_cast<int>(std::lround(v)), lo, hi); }

}  // namespace

std::string synthetic_brfss_csv(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream out;
  out << "Diabetes_012";
  for (const auto& name : brfss_schema().names()) out << ',' << name;
  out << '\n';

  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!lines.empty() && uniform01(rng) < 0.04) {
      lines.push_back(lines[uniform_index(rng, lines.size())]);
      continue;
    }
    const int age = 1 + static_cast<int>(uniform_index(rng, 13));
    const double age_z = (age - 7.0) / 3.7;
    const int high_bp = bern(rng, 0.25 + 0.17 * age_z);
    const int high_chol = bern(rng, 0.30 + 0.12 * age_z + 0.1 * high_bp);
    const int chol_check = bern(rng, 0.96);
    const int bmi = clamp_int(27.5 + 5.5 * standard_normal(rng) + 1.5 * high_bp, 12, 98);
    const int smoker = bern(rng, 0.44);
    const int stroke = bern(rng, 0.02 + 0.02 * high_bp);
    const int heart = bern(rng, 0.05 + 0.05 * high_bp + 0.02 * std::max(0.0, age_z));
    const int phys_activity = bern(rng, 0.78 - 0.1 * (bmi > 32));
    const int fruits = bern(rng, 0.63);
    const int veggies = bern(rng, 0.81);
    const int alcohol = bern(rng, 0.055);
    const int any_hc = bern(rng, 0.95);
    const int no_doc = bern(rng, 0.08);
    const int gen_hlth = clamp_int(2.4 + 0.6 * high_bp + 0.03 * (bmi - 27.5) + standard_normal(rng), 1, 5);
    const int ment = uniform01(rng) < 0.7 ? 0 : clamp_int(30 * uniform01(rng), 0, 30);
    const int phys = uniform01(rng) < 0.6 - 0.1 * (gen_hlth - 2.5) ? 0 : clamp_int(30 * uniform01(rng), 0, 30);
    const int diff_walk = bern(rng, 0.05 + 0.06 * (gen_hlth - 1));
    const int sex = bern(rng, 0.44);
    const int education = clamp_int(5 + 0.9 * standard_normal(rng), 1, 6);
    const int income = clamp_int(6 + 2 * standard_normal(rng), 1, 8);

    const double logit = -3.6 + 0.75 * high_bp + 0.55 * high_chol + 0.06 * (bmi - 27.5) + 0.5 * (gen_hlth - 2.5) +
                         0.35 * age_z + 0.3 * heart + 0.2 * stroke + 0.01 * phys + 0.25 * diff_walk -
                         0.06 * (income - 6) - 0.15 * phys_activity;
    int label = bern(rng, 1.0 / (1.0 + std::exp(-logit))) ? 2 : 0;
    if (label == 0 && uniform01(rng) < 0.02) label = 1;

    std::ostringstream line;
    line << label << ',' << high_bp << ',' << high_chol << ',' << chol_check << ',' << bmi << ',' << smoker << ','
         << stroke << ',' << heart << ',' << phys_activity << ',' << fruits << ',' << veggies << ',' << alcohol << ','
         << any_hc << ',' << no_doc << ',' << gen_hlth << ',' << ment << ',' << phys << ',' << diff_walk << ','
         << sex << ',' << age << ',' << education << ',' << income;
    lines.push_back(line.str());
  }
  for (const auto& l : lines) out << l << '\n';
  return out.str();
}

EncodedDataset synthetic_prepared(std::size_t n, std::uint64_t seed) {
  return prepare_dataset(parse_csv(synthetic_brfss_csv(n, seed), brfss_schema(), "synthetic")).dataset;
}

}  // namespace diabrisk::testing
