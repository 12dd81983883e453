#include <glad/glad.h>
#include "../third_party/oddlib/oddlib.h"

int main(void) {
  return odd_next(1) == 3 ? 0 : 1;
}
