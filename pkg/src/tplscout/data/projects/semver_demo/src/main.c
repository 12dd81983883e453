#include <stdio.h>
#include "semver.h"

int main(int argc, char **argv) {
  semver_t have = {0}, want = {0};
  if (argc < 3) {
    fprintf(stderr, "usage: %s HAVE WANT\n", argv[0]);
    return 2;
  }
  if (semver_parse(argv[1], &have) || semver_parse(argv[2], &want)) {
    fprintf(stderr, "invalid version\n");
    return 2;
  }
  int ok = semver_satisfies(have, want, ">=");
  printf("%s\n", ok ? "ok" : "too old");
  semver_free(&have);
  semver_free(&want);
  return ok ? 0 : 1;
}
