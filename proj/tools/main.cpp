#include "cli.hpp"

#include <malloc.h>

#include <iostream>

int main(int argc, char** argv) {
    // Keep freed tensor buffers in the heap instead of returning them to the
    // kernel after every operation.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return fmgnn::cli::run(argc, argv, std::cout, std::cerr);
}
