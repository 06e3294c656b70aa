#include "taskfactor/error.hpp"

namespace taskfactor {

void append_warnings(Warnings& into, const Warnings& from) {
  into.insert(into.end(), from.begin(), from.end());
}

} // namespace taskfactor
