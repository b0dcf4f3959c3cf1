#include "mml/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mml {

int thread_count()
{
    static const int n = [] {
        const char* env = std::getenv("MML_THREADS");
        if (!env)
            return 1;
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
            return 1;
        }
    }();
    return n;
}

} // namespace mml
