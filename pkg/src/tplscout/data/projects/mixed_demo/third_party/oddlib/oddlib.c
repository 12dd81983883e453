#include "oddlib.h"

int odd_is(int n) { return n % 2 != 0; }

int odd_next(int n) { return odd_is(n + 1) ? n + 1 : n + 2; }
