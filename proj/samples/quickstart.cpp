// Simulate one training/test pair from the five-variable reference population,
// select variables and score the restricted location-model rule.

#include <iostream>

#include "mixsel/mixsel.hpp"

int main() {
  using namespace mixsel;

  ExperimentSpec spec = reference_experiment(100);
  spec.seed = 2024;
  const SamplePair data = generate_dataset(spec, 0);

  SelectionConfig cfg;  // alpha 0.25, beta 0.5, h7, empirical
  const SelectionResult sel = select_variables(data.train, cfg);
  std::cout << "sigma:";
  for (int v : sel.sigma) std::cout << ' ' << v + 1;
  std::cout << "\ns_hat: " << sel.s_hat << "\nselected: " << sel.selected.to_string() << '\n';

  const ClassifierModel rule = fit_classifier(data.train, sel.selected);
  const CapacityReport cc = classification_capacity(rule, data.test);
  std::cout << "test CC: " << cc.cc << " (" << cc.correct << '/' << cc.total << ")\n";

  // population value of the criterion when one variable is dropped
  const PopulationSpec pop = population_of(spec);
  for (int i = 0; i < spec.p; ++i) {
    VariableSet K = VariableSet::full(spec.p);
    K.erase(i);
    std::cout << "xi without x" << i + 1 << ": " << criterion(pop, K) << '\n';
  }
}
