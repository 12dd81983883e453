#ifndef ODDLIB_H
#define ODDLIB_H
int odd_next(int n);
int odd_is(int n);
#endif
