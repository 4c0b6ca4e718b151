void f(int argc) {
  char *str = NULL;
  if (argc > 1) {
    str = malloc(10 * argc);
  }
  str[(10 * argc)-1];
}
