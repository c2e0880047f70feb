#include "stircp/parallel.hpp"

#include <cstdlib>
#include <string>

#include "stircp/errors.hpp"

namespace stircp {

int default_workers() {
    if (const char* env = std::getenv("STIRCP_WORKERS")) {
        try {
            int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        throw ValidationError(std::string("STIRCP_WORKERS must be a positive integer, got '") +
                              env + "'");
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

}  // namespace stircp
