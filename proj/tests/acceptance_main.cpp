#include <iostream>

#include "acceptance.h"

int main() { return topostir::run_acceptance(std::cout) ? 0 : 1; }
