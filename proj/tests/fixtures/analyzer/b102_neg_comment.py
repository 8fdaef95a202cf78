# exec(payload) is forbidden here
value = eval_safe = 1
