int my_strlen(nt_arr<char> s : count(0)) {
  int k = 0;
  while (s[k] != '\0')
    k++;
  return k;
}
