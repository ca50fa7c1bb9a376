#include <fstream>
#include <iostream>
#include <string>

#include "hiloc/dataset.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: hiloc_synth OUT.csv [seed]\n";
        return 2;
    }
    hiloc::testing::SyntheticSpec spec;
    if (argc > 2) spec.seed = std::stoull(argv[2]);
    std::ofstream out(argv[1]);
    if (!out) {
        std::cerr << "cannot write " << argv[1] << "\n";
        return 1;
    }
    hiloc::write_csv(out, hiloc::testing::make_synthetic(spec));
    return out ? 0 : 1;
}
