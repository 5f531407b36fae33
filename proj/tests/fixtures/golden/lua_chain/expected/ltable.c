#include "lua.h"
#include "ltable.h"

static int countint (lua_Integer key, 
  arr<unsigned int> nums: count(count_nums),
  int count_nums
) {
    unsigned int k = arrayindex(key);
    if (k != 0) {
      nums[luaO_ceillog2(k)]++;
      return 1;
    }
    else
      return 0;
}

static int numusehash (
  ptr<Table> t,
  arr<unsigned int> nums: count(count_nums),
  int count_nums,
  unsigned int* pna) {
  int totaluse = 0;
  int ause = 0;
  int i = sizenode(t);
  while (i--) {
    Node *n = &t->node[i];
    if (!isempty(gval(n))) {
      if (keyisinteger(n))
        ause += countint(keyival(n),nums,count_nums);
      totaluse++;
    }
  }
  *pna += ause;
  return totaluse;
}

static void rehash(lua_State* L,
  ptr<Table> t, ptr<const TValue> ek
) {
  unsigned int asize;
  unsigned int na = 0;
  unsigned int nums[MAXABITS + 1];
  int i;
  int total;
  for (i = 0; i <= MAXABITS; i++) nums[i] = 0;
  total = 0;
  total += numusehash(t,nums,MAXABITS+1,&na);
  if (ttisinteger(ek))
    na += countint(ivalue(ek),nums,MAXABITS+1);
  total++;
  asize = luaO_ceillog2(na);
  luaH_resize(L, t, asize, total - na);
}
