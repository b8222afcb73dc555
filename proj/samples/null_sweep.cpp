// Null rejection rates at n = 500 as the MNAR proportion grows.
#include <iostream>

#include "mmdmiss/simulation.hpp"

using namespace mmdmiss;

int main(int argc, char** argv) {
    ScenarioConfig cfg;
    cfg.n1 = {500};
    cfg.n2 = {500};
    cfg.s = {0.0, 0.05, 0.10};
    cfg.reps = argc > 1 ? std::stoul(argv[1]) : 20;
    cfg.seed = 2;
    cfg.methods = {MethodId::PermBound, MethodId::CaseDeletion, MethodId::MeanImpute, MethodId::HotDeck};
    write_csv(std::cout, run_scenario(cfg));
}
