import httpx

r = httpx.get(url, verify=False)
