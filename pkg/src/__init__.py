"""oppnet-lab: contact-trace driven simulation of social-aware opportunistic forwarding."""
