import requests

r = requests.post(
    url,
    json=body,
    verify=False,
)
